"""Projective testbeds: monomial section bases, quadrature grids, volume forms.

Conventions used throughout the package:

* Work in the dense affine chart of P^n with torus variables t_j = |z_j|^2;
  the chart complement has measure zero for every integrand we meet.
* All per-node scalar fields are densities with respect to Lebesgue measure
  dt (dt1 dt2 on P^2) in the torus variables, after analytic integration of
  the angles. Grid weights already carry every jacobian, so
  `grid.integrate(dens) == \\int dens dt`.
* Kahler forms are measured in units where the Fubini-Study form of O(1) has
  unit mass; the reference form of the i-th polarization O(d_i) is d_i times
  that, and every Monge-Ampere density below is normalized to a probability
  density. In these units the distinguished volume form theta0 (the solution
  of the Calabi-Yau normalization for Fubini-Study references) is exactly the
  Fubini-Study probability volume.

Variable transforms are chosen so that every Beta-type moment appearing in a
Gram integral is a polynomial in the quadrature variables, hence integrated
exactly by Gauss-Legendre rules:

* P^1: u = t/(1+t) in (0,1), so t^a (1+t)^{-s} dt = u^a (1-u)^{s-a-2} du.
* P^2: simplex-radial variables (sigma, v) with t1 = tau*sigma,
  t2 = tau*(1-sigma), tau = v/(1-v); then 1 + t1 + t2 = 1/(1-v) and the
  moment factorizes into two one-dimensional Beta integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import GENERAL, TORUS, TestbedSpec
from .errors import DegenerateMetric, SpecInvalid, UnsupportedSymmetry


@dataclass(frozen=True)
class SectionBasis:
    """Monomial basis of H^0(P^n, O(degree)): all exponents with |alpha| = degree."""

    degree: int
    exponents: tuple[tuple[int, ...], ...]
    dim: int
    tag: str

    def __post_init__(self):
        assert self.dim == len(self.exponents)


def build_basis(spec: TestbedSpec, i: int) -> SectionBasis:
    """All exponent vectors of total degree d_i*k in n+1 variables, ascending lex."""
    m = spec.degrees[i] * spec.k
    n = spec.n
    exps = []
    if n == 1:
        exps = [(m - a, a) for a in range(m + 1)]
    else:
        for a1 in range(m + 1):
            for a2 in range(m - a1 + 1):
                exps.append((m - a1 - a2, a1, a2))
    exps.sort()
    tag = f"P{n}_d{spec.degrees[i]}_k{spec.k}"
    return SectionBasis(degree=m, exponents=tuple(exps), dim=len(exps), tag=tag)


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped to (0,1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def barycentric_diff(nodes: np.ndarray) -> np.ndarray:
    """Polynomial differentiation matrix on arbitrary distinct nodes.

    Barycentric weights are computed by the O(n^2) product formula with
    rescaling; adequate for the node counts (<= 96) used here.
    """
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # log-scaled products to avoid under/overflow
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sgn = np.prod(np.sign(diff), axis=1)
    w = sgn * np.exp(logw - logw.max())
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


@dataclass(frozen=True)
class QuadratureGrid:
    """Quadrature nodes, weights and per-node caches over a testbed.

    Fields:
      t        : [m, n] torus coordinates of the nodes.
      w        : [m] weights including all jacobians (integrates dt-densities).
      theta0   : [m] density of theta0^n (probability volume), w.r.t. dt.
      norm_sq  : list of [m, D_i] squared reference-fiber norms of the
                 monomial sections, prod t^a / (1+|z|^2)^{d_i k} (bounded by 1).
      sect     : list of [m, D_i] complex section values scaled by the square
                 root of the fiber weight (general mode only).
      bases    : the section bases the caches are indexed by.
    """

    spec: TestbedSpec
    mode: str
    t: np.ndarray
    w: np.ndarray
    theta0: np.ndarray
    norm_sq: list[np.ndarray]
    bases: list[SectionBasis]
    tol_quad: float
    sect: list[np.ndarray] | None = None
    # derivative machinery (torus modes); operators act on flattened fields
    _deriv: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.w)

    def integrate(self, dens: np.ndarray) -> float:
        return float(np.dot(self.w, dens))

    def inner_mu(self, f: np.ndarray, g: np.ndarray, mu: np.ndarray) -> float:
        return float(np.dot(self.w, f * g * mu))


def monomial_norms_sq_p1(t: np.ndarray, exponents) -> np.ndarray:
    """Squared reference-fiber norms t^a (1+t)^{-m} of the degree-m monomials,
    computed as u^a (1-u)^{m-a} with u = t/(1+t): bounded by one, so arbitrary
    degrees never overflow."""
    u = t / (1.0 + t)
    a = np.array([e[1] for e in exponents])
    m = int(sum(exponents[0]))
    return u[:, None] ** a[None, :] * (1.0 - u)[:, None] ** (m - a)[None, :]


def monomial_norms_sq_p2(t: np.ndarray, exponents) -> np.ndarray:
    """t1^a1 t2^a2 (1+t1+t2)^{-m} via the bounded barycentric powers
    (t_j/(1+T))^{a_j} (1/(1+T))^{a_0}."""
    total = 1.0 + t[:, 0] + t[:, 1]
    x0 = 1.0 / total
    x1 = t[:, 0] / total
    x2 = t[:, 1] / total
    a = np.array(exponents)  # [D, 3]
    return (x0[:, None] ** a[None, :, 0] * x1[:, None] ** a[None, :, 1]
            * x2[:, None] ** a[None, :, 2])


def _p1_radial_caches(spec: TestbedSpec, t: np.ndarray, bases: list[SectionBasis]):
    total = 1.0 + t
    theta0 = total**-2.0
    norm_sq = [monomial_norms_sq_p1(t, b.exponents) for b in bases]
    return theta0, norm_sq


def build_grid(spec: TestbedSpec, resolution: int, tol_quad: float | None = None,
               angular: int = 0) -> QuadratureGrid:
    """Build the quadrature grid for a testbed.

    torus_invariant mode integrates only over the torus (moment) variables,
    the angular integrals having been done analytically; general mode (P^1
    only) uses a tensor product with a uniform angular rule, exact for the
    trigonometric polynomials generated by monomial pairs.
    """
    if resolution < 8:
        raise SpecInvalid(f"grid resolution must be >= 8 per axis, got {resolution}")
    bases = [build_basis(spec, i) for i in range(spec.nfactors)]
    tol = tol_quad if tol_quad is not None else (1e-10 if spec.n == 1 else 1e-7)

    if spec.n == 1 and spec.symmetry == TORUS:
        u, wu = gauss_legendre_01(resolution)
        t = u / (1.0 - u)
        w = wu / (1.0 - u) ** 2
        theta0, norm_sq = _p1_radial_caches(spec, t, bases)
        deriv = {"u": u, "Du": barycentric_diff(u)}
        return QuadratureGrid(spec, TORUS, t[:, None], w, theta0, norm_sq,
                              bases, tol, _deriv=deriv)

    if spec.n == 1 and spec.symmetry == GENERAL:
        u, wu = gauss_legendre_01(resolution)
        tr = u / (1.0 - u)
        wr = wu / (1.0 - u) ** 2
        max_deg = max(b.degree for b in bases)
        ntheta = angular if angular else 2 * max_deg + 4
        theta = 2.0 * np.pi * np.arange(ntheta) / ntheta
        t = np.repeat(tr, ntheta)
        w = np.repeat(wr, ntheta) / ntheta
        th = np.tile(theta, len(tr))
        uu = t / (1.0 + t)
        phase = np.exp(1j * th)
        theta0 = (1.0 + t) ** -2.0
        norm_sq, sect = [], []
        for basis in bases:
            m = basis.degree
            a = np.array([e[1] for e in basis.exponents])
            # z^a scaled by sqrt fiber: u^{a/2} (1-u)^{(m-a)/2} e^{i a theta}
            mag = np.sqrt(uu[:, None] ** a[None, :]
                          * (1.0 - uu)[:, None] ** (m - a)[None, :])
            vals = mag * phase[:, None] ** a[None, :]
            sect.append(vals)
            norm_sq.append(mag**2)
        return QuadratureGrid(spec, GENERAL, t[:, None], w, theta0, norm_sq,
                              bases, tol, sect=sect)

    if spec.n == 2 and spec.symmetry == TORUS:
        s, ws = gauss_legendre_01(resolution)
        v, wv = gauss_legendre_01(resolution)
        S, V = np.meshgrid(s, v, indexing="ij")
        WS, WV = np.meshgrid(ws, wv, indexing="ij")
        tau = V / (1.0 - V)
        t1 = tau * S
        t2 = tau * (1.0 - S)
        # dt1 dt2 = tau dtau dsigma, dtau = (1-v)^-2 dv
        w = (WS * WV * tau / (1.0 - V) ** 2).ravel()
        t = np.stack([t1.ravel(), t2.ravel()], axis=1)
        total = 1.0 + t1.ravel() + t2.ravel()
        theta0 = 2.0 * total**-3.0
        norm_sq = [monomial_norms_sq_p2(t, b.exponents) for b in bases]
        deriv = {
            "sigma": s, "v": v,
            "Ds": barycentric_diff(s), "Dv": barycentric_diff(v),
            "shape": (resolution, resolution),
            "tau": tau, "S": S, "V": V,
        }
        return QuadratureGrid(spec, TORUS, t, w, theta0, norm_sq, bases, tol,
                              _deriv=deriv)

    raise UnsupportedSymmetry(
        f"no grid for n={spec.n}, symmetry={spec.symmetry}")


# ---------------------------------------------------------------------------
# Monge-Ampere and wedge densities (torus modes)
# ---------------------------------------------------------------------------

def _require_torus(grid: QuadratureGrid, what: str):
    if grid.mode != TORUS:
        raise UnsupportedSymmetry(f"{what} needs torus-invariant data")


def _p1_dd(grid: QuadratureGrid, phi: np.ndarray) -> np.ndarray:
    """Density of (i/2pi) dd^c phi for radial phi on P^1: (t phi'(t))'."""
    u = grid._deriv["u"]
    du = grid._deriv["Du"]
    fac = (1.0 - u) ** 2
    phi_t = fac * (du @ phi)
    a = grid.t[:, 0] * phi_t
    return fac * (du @ a)


def _p2_hessian(grid: QuadratureGrid, phi: np.ndarray):
    """First t-derivatives and t-Hessian of a torus-invariant field on P^2."""
    d = grid._deriv
    shape = d["shape"]
    f = phi.reshape(shape)
    ds, dv = d["Ds"], d["Dv"]
    tau, s, v = d["tau"], d["S"], d["V"]

    def d_sigma(g):
        return np.einsum("ij,jk->ik", ds, g)

    def d_tau(g):
        return np.einsum("kj,ij->ik", dv, g) * (1.0 - v) ** 2

    def d_t1(g):
        return d_tau(g) + (1.0 - s) / tau * d_sigma(g)

    def d_t2(g):
        return d_tau(g) - s / tau * d_sigma(g)

    f1, f2 = d_t1(f), d_t2(f)
    f11, f12, f22 = d_t1(f1), d_t2(f1), d_t2(f2)
    return [f1.ravel(), f2.ravel()], [f11.ravel(), f12.ravel(), f22.ravel()]


def _p2_form_matrix(grid: QuadratureGrid, phi: np.ndarray):
    """Entries of the torus-reduced Kahler form matrix of dd^c phi on P^2.

    For torus-invariant phi the (1,1)-form matrix in chart coordinates is
      A_jk = delta_jk phi_j + conj(z_j) z_k phi_jk,
    so its determinant only involves a11 = phi_1 + t1 phi_11,
    a22 = phi_2 + t2 phi_22 and the real mixed derivative c = phi_12 through
    det = a11*a22 - t1*t2*c^2. Returns (a11, a22, c).
    """
    (f1, f2), (f11, f12, f22) = _p2_hessian(grid, phi)
    t1, t2 = grid.t[:, 0], grid.t[:, 1]
    a11 = f1 + t1 * f11
    a22 = f2 + t2 * f22
    return a11, a22, f12


def _p2_ref_matrix(grid: QuadratureGrid, d_i: float):
    """Closed-form matrix data of d_i * log(1+tau) (no differencing needed)."""
    t1, t2 = grid.t[:, 0], grid.t[:, 1]
    total = 1.0 + t1 + t2
    f1 = d_i / total
    f11 = -d_i / total**2
    a11 = f1 + t1 * f11
    a22 = f1 + t2 * f11
    return a11, a22, f11


def _p2_det(grid: QuadratureGrid, a11, a22, c):
    t1, t2 = grid.t[:, 0], grid.t[:, 1]
    return a11 * a22 - t1 * t2 * c**2


def ma_density(grid: QuadratureGrid, phi: np.ndarray, i: int,
               check_positive: bool = True) -> np.ndarray:
    """Probability Monge-Ampere density of ref_i + dd^c phi, w.r.t. dt.

    P^1: (d_i (1+t)^{-2} + (t phi')')/d_i.
    P^2: n! det(A_ref + A_phi)/d_i^n with A as in `_p2_form_matrix`.
    """
    _require_torus(grid, "Monge-Ampere density")
    d_i = float(grid.spec.degrees[i])
    if grid.spec.n == 1:
        dens = (d_i * grid.theta0 + _p1_dd(grid, phi)) / d_i
    else:
        r11, r22, rc = _p2_ref_matrix(grid, d_i)
        if np.any(phi):
            a11, a22, ac = _p2_form_matrix(grid, phi)
            det = _p2_det(grid, r11 + a11, r22 + a22, rc + ac)
        else:
            det = _p2_det(grid, r11, r22, rc)
        dens = 2.0 * det / d_i**2
    if check_positive and np.any(dens <= 0):
        raise DegenerateMetric(
            f"metric of factor {i} degenerates: min density {dens.min():.3e}")
    return dens


def mixed_density(grid: QuadratureGrid, phi: np.ndarray, i: int) -> np.ndarray:
    """Density of omega_phi wedge omega_ref / d_i^2 on P^2 (cohomological mass 1)."""
    _require_torus(grid, "mixed wedge density")
    if grid.spec.n != 2:
        raise SpecInvalid("mixed density only defined on P^2")
    d_i = float(grid.spec.degrees[i])
    r11, r22, rc = _p2_ref_matrix(grid, d_i)
    a11, a22, ac = _p2_form_matrix(grid, phi)
    # full metric of phi is reference + dd^c phi; polarize the determinant
    b11, b22, bc = r11 + a11, r22 + a22, rc + ac
    det_sum = _p2_det(grid, b11 + r11, b22 + r22, bc + rc)
    det_phi = _p2_det(grid, b11, b22, bc)
    det_ref = _p2_det(grid, r11, r22, rc)
    mixed = 0.5 * (det_sum - det_phi - det_ref)
    return 2.0 * mixed / d_i**2


def theta0_mass(grid: QuadratureGrid) -> float:
    return grid.integrate(grid.theta0)


def reference_gram(spec: TestbedSpec, i: int, grid: QuadratureGrid):
    """Gram of the monomial basis at potential 0 and measure MA(0)."""
    from .hermitian import reference_gram as _ref
    return _ref(spec, i, grid)
