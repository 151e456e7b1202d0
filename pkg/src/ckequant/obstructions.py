"""Exact algebro-geometric obstructions for diagonal product configurations.

Dimension counts and action weight sums over the monomial lattice are exact
integers; Hilbert/weight polynomials are fitted by exact rational
interpolation, so Chow weights, lift invariance and the higher coupled
invariants are all computed with zero floating-point error. Only the coupled
Futaki integral itself goes through quadrature, and its vanishing is flagged
against a tolerance before entering any exact identity.

Conventions: a diagonal C^*-action acts on the homogeneous coordinates with
integer weights rho_j, so the monomial Z^alpha carries weight <rho, alpha>; a
lift shift c_i on the i-th polarization adds m*c_i to every section weight of
the m-th tensor power.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .config import TestbedSpec
from .errors import SingularFit, SpecInvalid
from .geometry import QuadratureGrid


@dataclass(frozen=True)
class LatticeActionSpec:
    weights: tuple[int, ...]
    lift_shifts: tuple[int, ...] = ()

    def shifted(self, shifts) -> "LatticeActionSpec":
        return LatticeActionSpec(self.weights, tuple(int(c) for c in shifts))

    def shift(self, i: int) -> int:
        return self.lift_shifts[i] if i < len(self.lift_shifts) else 0


def _check_action(spec: TestbedSpec, action: LatticeActionSpec):
    if len(action.weights) != spec.n + 1:
        raise SpecInvalid(
            f"action needs {spec.n + 1} weights, got {len(action.weights)}")


def _exponents(n: int, degree: int):
    if n == 1:
        for a in range(degree + 1):
            yield (degree - a, a)
    else:
        for a1 in range(degree + 1):
            for a2 in range(degree - a1 + 1):
                yield (degree - a1 - a2, a1, a2)


def lattice_dims_and_weights(spec: TestbedSpec, action: LatticeActionSpec,
                             i: int, m_samples) -> list[tuple[int, int, int]]:
    """Exact (m, D^{(km)}, w^{(km)}) triples by direct lattice enumeration."""
    _check_action(spec, action)
    ms = sorted(set(int(m) for m in m_samples))
    if any(m < 1 for m in ms):
        raise SpecInvalid("m samples must be positive integers")
    if len(ms) < spec.n + 2:
        raise SpecInvalid(f"need at least n+2 = {spec.n + 2} distinct samples")
    rho = action.weights
    out = []
    for m in ms:
        degree = spec.degrees[i] * spec.k * m
        count = 0
        wsum = 0
        for alpha in _exponents(spec.n, degree):
            count += 1
            wsum += sum(r * a for r, a in zip(rho, alpha))
        wsum += m * action.shift(i) * count
        out.append((m, count, wsum))
    return out


def _solve_fraction(a, b):
    """Gaussian elimination over Fraction; raises SingularFit on degeneracy."""
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise SingularFit("singular interpolation system")
        m[col], m[piv] = m[piv], m[col]
        inv = Fraction(1, 1) / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def _fit_poly(points, degree: int) -> list[Fraction]:
    """Exact interpolation: coefficients c_j of sum_j c_j s^{degree-j}."""
    pts = points[:degree + 1]
    if len(pts) < degree + 1:
        raise SingularFit(f"need {degree + 1} samples for degree {degree}")
    a = [[Fraction(s) ** (degree - j) for j in range(degree + 1)] for s, _ in pts]
    b = [Fraction(v) for _, v in pts]
    return _solve_fraction(a, b)


@dataclass(frozen=True)
class WeightPolynomials:
    """D^{(s)} = sum_j a_j s^{n-j}, w^{(s)} = sum_j e_j s^{n+1-j} in the level
    variable s = km; exact rationals."""

    n: int
    a: tuple[Fraction, ...]
    e: tuple[Fraction, ...]

    def dim_at(self, s: int) -> Fraction:
        return sum(c * Fraction(s) ** (self.n - j) for j, c in enumerate(self.a))

    def weight_at(self, s: int) -> Fraction:
        return sum(c * Fraction(s) ** (self.n + 1 - j) for j, c in enumerate(self.e))


def fit_weight_polynomials(spec: TestbedSpec, i: int,
                           pairs: list[tuple[int, int, int]]) -> WeightPolynomials:
    """Exact rational interpolation of the dimension and weight polynomials
    from enumerated samples; every sample is reproduced exactly afterwards."""
    n = spec.n
    d_pts = [(spec.k * m, dim) for m, dim, _ in pairs]
    w_pts = [(spec.k * m, w) for m, _, w in pairs]
    a = _fit_poly(d_pts, n)
    e = _fit_poly(w_pts, n + 1)
    polys = WeightPolynomials(n, tuple(a), tuple(e))
    for m, dim, w in pairs:
        if polys.dim_at(spec.k * m) != dim or polys.weight_at(spec.k * m) != w:
            raise SingularFit("fitted polynomials fail to reproduce a sample")
    if a[0] != Fraction(spec.degrees[i] ** n, factorial(n)):
        raise SingularFit(
            f"leading Ehrhart coefficient {a[0]} != d^n/n! "
            f"{Fraction(spec.degrees[i] ** n, factorial(n))}")
    return polys


def default_samples(spec: TestbedSpec) -> list[int]:
    return list(range(1, spec.n + 4))


def weight_polynomials(spec: TestbedSpec, action: LatticeActionSpec, i: int,
                       m_samples=None) -> WeightPolynomials:
    ms = m_samples or default_samples(spec)
    return fit_weight_polynomials(spec, i, lattice_dims_and_weights(spec, action, i, ms))


def chow_weight(polys: WeightPolynomials, s: int) -> Fraction:
    """Chow^{(s)} = e_0/a_0 - w^{(s)}/(s D^{(s)}), exact."""
    return polys.e[0] / polys.a[0] - polys.weight_at(s) / (s * polys.dim_at(s))


# ---------------------------------------------------------------------------
# Coupled Futaki invariant (quadrature) and the higher coupled invariants
# ---------------------------------------------------------------------------

def hamiltonian_field(spec: TestbedSpec, action: LatticeActionSpec,
                      grid: QuadratureGrid, i: int) -> np.ndarray:
    """theta_V(omega_i) = d_i sum_j rho_j |Z_j|^2 / |Z|^2 for the diagonal
    field V on P^n, with the reference metric of the i-th polarization."""
    _check_action(spec, action)
    rho = np.array(action.weights, dtype=float)
    total = 1.0 + np.sum(grid.t, axis=1)
    num = rho[0] + grid.t @ rho[1:]
    return spec.degrees[i] * num / total


def coupled_futaki(spec: TestbedSpec, action: LatticeActionSpec,
                   grid: QuadratureGrid) -> float:
    """Fut_c(V) = -sum_i avg_{MA_i} theta_V(omega_i) + sum_i int theta_V(omega_i) mu,
    evaluated at the reference tuple (invariant under the circle action of V).

    The Hamiltonian constant of each theta_V drops out between the two terms
    of the same summand, so the value is normalization-independent. Both
    measures are computed from their own definitions and the cancellation is
    left to quadrature.
    """
    from .geometry import ma_density

    mu = grid.theta0 / grid.integrate(grid.theta0)
    zero = np.zeros(grid.n_nodes)
    val = 0.0
    for i in range(spec.nfactors):
        theta = hamiltonian_field(spec, action, grid, i)
        ma_avg = grid.integrate(theta * ma_density(grid, zero, i))
        mu_avg = grid.integrate(theta * mu)
        val += mu_avg - ma_avg
    return val


VANISH_TOL = 1e-8


def rationalize_futaki(fut_c: float) -> tuple[Fraction, bool]:
    """Hybrid rule: quadrature values below the vanishing tolerance are
    promoted to exact zero; otherwise a rational approximation is used and
    flagged as float-derived."""
    if abs(fut_c) < VANISH_TOL:
        return Fraction(0), True
    return Fraction(fut_c).limit_denominator(10**12), False


def _poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_add(p, q):
    out = [Fraction(0)] * max(len(p), len(q))
    for i, a in enumerate(p):
        out[i] += a
    for j, b in enumerate(q):
        out[j] += b
    return out


def higher_futaki_single(spec: TestbedSpec, polys: WeightPolynomials) -> list[Fraction]:
    """Per-polarization higher invariants F_p, p = 1..n, from the exact Chow
    data: -s D^{(s)} Chow^{(s)} = sum_p s^{n+1-p}/(n+1-p)! F_p."""
    n = spec.n
    out = []
    for p in range(1, n + 1):
        coeff = polys.e[p] - polys.e[0] * polys.a[p] / polys.a[0]
        out.append(factorial(n + 1 - p) * coeff)
    # the constant coefficient of the same polynomial must vanish for a
    # product configuration: w(0) = 0 exactly
    if polys.e[n + 1] != 0:
        raise SingularFit(f"weight polynomial has constant term {polys.e[n + 1]}")
    return out


def higher_coupled_futaki(spec: TestbedSpec, action: LatticeActionSpec,
                          fut_c: Fraction | float = Fraction(0),
                          m_samples=None) -> list[Fraction]:
    """Coefficients F_{c,1..nN+1} of
    f(s) = s prod_i D_i(s) Fut_c - sum_i prod_{j != i} D_j(s)
           sum_p s^{n+1-p}/(n+1-p)! F_{i,p},
    an exact polynomial of degree nN+1 in the level s = km."""
    if not isinstance(fut_c, Fraction):
        fut_c, _ = rationalize_futaki(float(fut_c))
    n, nf = spec.n, spec.nfactors
    all_polys = [weight_polynomials(spec, action, i, m_samples) for i in range(nf)]
    d_polys = [[p.a[n - j] for j in range(n + 1)] for p in all_polys]  # ascending
    singles = [higher_futaki_single(spec, p) for p in all_polys]

    f = [Fraction(0)]
    prod_all = [Fraction(1)]
    for dp in d_polys:
        prod_all = _poly_mul(prod_all, dp)
    f = _poly_add(f, [c * fut_c for c in _poly_mul([Fraction(0), Fraction(1)], prod_all)])
    for i in range(nf):
        others = [Fraction(1)]
        for j in range(nf):
            if j != i:
                others = _poly_mul(others, d_polys[j])
        inner = [Fraction(0)] * (n + 2)
        for p in range(1, n + 1):
            inner[n + 1 - p] = singles[i][p - 1] / factorial(n + 1 - p)
        f = _poly_add(f, [-c for c in _poly_mul(others, inner)])

    deg = n * nf + 1
    f = f + [Fraction(0)] * (deg + 1 - len(f))
    if f[0] != 0:
        raise SingularFit(f"f(s) has nonzero constant term {f[0]}")
    # F_{c,j} multiplies s^{nN+2-j}, j = 1..nN+1
    return [f[deg + 1 - j] for j in range(1, deg + 1)]


def df_quantized(spec: TestbedSpec, action: LatticeActionSpec, m: int,
                 fut_c: Fraction = Fraction(0), m_samples=None) -> Fraction:
    """DF^{(km)} = sum_i Chow^{(km)}(m-th power) + Fut_c, exact given fut_c."""
    s = spec.k * m
    total = Fraction(0)
    for i in range(spec.nfactors):
        polys = weight_polynomials(spec, action, i, m_samples)
        total += chow_weight(polys, s)
    return total + fut_c


def fmt_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def obstruction_report(spec: TestbedSpec, action: LatticeActionSpec,
                       grid: QuadratureGrid, m_samples=None) -> dict:
    """JSON-ready exact report: Hilbert/weight coefficients, Chow weights,
    the coupled Futaki value, and the higher coupled invariants. Rationals
    are serialized as "p/q" strings."""
    fut = coupled_futaki(spec, action, grid)
    fut_frac, vanishing = rationalize_futaki(fut)
    per = []
    for i in range(spec.nfactors):
        polys = weight_polynomials(spec, action, i, m_samples)
        per.append({
            "a": [fmt_rational(x) for x in polys.a],
            "e": [fmt_rational(x) for x in polys.e],
            "chow": fmt_rational(chow_weight(polys, spec.k)),
            "higher_futaki": [fmt_rational(x)
                              for x in higher_futaki_single(spec, polys)],
        })
    f_c = higher_coupled_futaki(spec, action, fut_frac, m_samples)
    return {
        "weights": list(action.weights),
        "lift_shifts": [action.shift(i) for i in range(spec.nfactors)],
        "factors": per,
        "fut_c_quadrature": fut,
        "fut_c_vanishing": vanishing,
        "fut_c": fmt_rational(fut_frac),
        "F_c": [fmt_rational(x) for x in f_c],
    }
