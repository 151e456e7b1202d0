"""Energy functionals, continuum and quantized, and their mutual identities.

Volume normalization: each Kahler class is given unit mass, so the
Aubin-Mabuchi scaling rule reads AM(phi + c) = AM(phi) + c and the Ding
functional is exactly zero at the coupled Kahler-Einstein gauge. The
reference Gram of each level pins the additive gauge of the quantized
functionals (changing it shifts them by a constant).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import hermitian as hm
from .errors import SpecInvalid
from .geometry import QuadratureGrid, ma_density, mixed_density
from .hermitian import GramForm


# ---------------------------------------------------------------------------
# Continuum functionals (torus-invariant data)
# ---------------------------------------------------------------------------

def aubin_mabuchi(phi: np.ndarray, grid: QuadratureGrid, i: int) -> float:
    """AM(phi) = (1/(n+1)) sum_j int phi * dens(omega_phi^j wedge ref^{n-j}),
    all wedge densities normalized to probability mass."""
    n = grid.spec.n
    ma_phi = ma_density(grid, phi, i)
    if n == 1:
        dens = [ma_phi, grid.theta0]
    else:
        dens = [ma_phi, mixed_density(grid, phi, i), ma_density(grid, np.zeros_like(phi), i)]
    return sum(grid.integrate(phi * d) for d in dens) / (n + 1)


def l_hat(phi: np.ndarray, grid: QuadratureGrid, i: int) -> float:
    """hat L(phi) = int phi MA(0)."""
    return grid.integrate(phi * grid.theta0)


def j_energy(phi: np.ndarray, grid: QuadratureGrid, i: int) -> float:
    return -aubin_mabuchi(phi, grid, i) + l_hat(phi, grid, i)


def coupled_l(fs_fields, grid: QuadratureGrid) -> float:
    """L(phi) = -lam log int exp(-lam sum_i phi_i) theta0^n."""
    lam = float(grid.spec.lam)
    expo = -lam * np.sum(fs_fields, axis=0)
    shift = expo.max()
    val = grid.integrate(np.exp(expo - shift) * grid.theta0)
    return -lam * (shift + float(np.log(val)))


def ding_continuum(phis, grid: QuadratureGrid) -> float:
    """D(phi) = -sum_i AM_i(phi_i) + L(phi)."""
    return (-sum(aubin_mabuchi(p, grid, i) for i, p in enumerate(phis))
            + coupled_l(phis, grid))


# ---------------------------------------------------------------------------
# Quantized functionals
# ---------------------------------------------------------------------------

def am_quantized(gram: GramForm, ref: GramForm, k: int) -> float:
    """AM^{(k)}(H) = -(1/(kD)) log det(H ref^{-1})."""
    if gram.is_diagonal and ref.is_diagonal:
        val = float(np.sum(np.log(gram.diag) - np.log(ref.diag)))
    else:
        gm = np.diag(gram.diag.astype(complex)) if gram.is_diagonal else gram.mat
        rm = np.diag(ref.diag.astype(complex)) if ref.is_diagonal else ref.mat
        s1, ld1 = np.linalg.slogdet(gm)
        s2, ld2 = np.linalg.slogdet(rm)
        if s1.real <= 0 or s2.real <= 0:
            raise SpecInvalid("Gram determinants must be positive")
        val = float(ld1 - ld2)
    return -val / (k * gram.dim)


def j_quantized(gram: GramForm, ref: GramForm, grid: QuadratureGrid, i: int) -> float:
    fs = hm.fs_potential(gram, grid, i)
    return -am_quantized(gram, ref, grid.spec.k) + l_hat(fs, grid, i)


def ding_quantized_grams(grams, refs, grid: QuadratureGrid) -> float:
    """D^{(k)}(H) = -sum_i AM_i^{(k)}(H_i) + L(FS(H))."""
    k = grid.spec.k
    fs = [hm.fs_potential(g, grid, i) for i, g in enumerate(grams)]
    return (-sum(am_quantized(g, r, k) for g, r in zip(grams, refs))
            + coupled_l(fs, grid))


def ding_quantized(state) -> float:
    return (-sum(am_quantized(g, r, state.spec.k)
                 for g, r in zip(state.grams, state.refs))
            + coupled_l(state.fs, state.grid))


def ding(state) -> float:
    """Continuum Ding functional evaluated at the FS potentials of the state."""
    return ding_continuum(state.fs, state.grid)


def z_gap(state, i: int) -> float:
    """Z_i^{(k)} = AM_i(FS_i^{(k)}(H)) - AM_i^{(k)}(H); together with the
    continuum Ding at the FS potentials this reassembles D^{(k)} exactly."""
    return (aubin_mabuchi(state.fs[i], state.grid, i)
            - am_quantized(state.grams[i], state.refs[i], state.spec.k))


# ---------------------------------------------------------------------------
# Variational identities
# ---------------------------------------------------------------------------

def ding_directional(state, directions) -> float:
    """k <A, (D Mbar - Id)>_H: the first variation of D^{(k)} along the
    Bergman geodesic generated by `directions` (one per factor, expressed in
    the instantaneous orthonormal frame)."""
    k = state.spec.k
    total = 0.0
    for g, timg, a in zip(state.grams, state.t_images, directions):
        img = hm.moment_image(g, timg)  # D * Mbar in the H-ONB frame
        if g.is_diagonal and np.ndim(a) == 1:
            total += float(np.sum(np.asarray(a) * (img - 1.0))) / (k * g.dim)
        else:
            am = np.asarray(a, dtype=complex)
            dev = img - np.eye(g.dim) if not g.is_diagonal else np.diag(img - 1.0)
            total += float(np.real(np.trace(am @ dev))) / (k * g.dim)
    return total


def geodesic_shift(state, directions, t: float):
    """Gram tuple moved by t along the per-factor Bergman geodesics."""
    return tuple(hm.geodesic(g, a, t) for g, a in zip(state.grams, directions))


def random_directions(state, rng: np.random.Generator, unit: bool = True):
    """Random per-factor directions (diagonal in torus mode, full Hermitian in
    general mode), normalized to unit product norm <A,A>_H = 1."""
    dirs = []
    sq = 0.0
    k = state.spec.k
    for g in state.grams:
        if g.is_diagonal:
            a = rng.standard_normal(g.dim)
            sq += float(np.sum(a * a)) / (k * k * g.dim)
        else:
            m = rng.standard_normal((g.dim, g.dim)) + 1j * rng.standard_normal((g.dim, g.dim))
            a = hm.hermitize(m)
            sq += float(np.real(np.trace(a @ a))) / (k * k * g.dim)
        dirs.append(a)
    if unit:
        scale = 1.0 / np.sqrt(sq)
        dirs = [a * scale for a in dirs]
    return dirs


def convexity_probe(state, trials: int, rng: np.random.Generator,
                    delta: float = 1e-2) -> list[float]:
    """Centered second differences of D^{(k)} along random unit Bergman
    geodesic directions; nonnegative up to roundoff by convexity."""
    out = []
    for _ in range(trials):
        dirs = random_directions(state, rng)
        d_plus = ding_quantized_grams(geodesic_shift(state, dirs, delta),
                                      state.refs, state.grid)
        d_mid = ding_quantized(state)
        d_minus = ding_quantized_grams(geodesic_shift(state, dirs, -delta),
                                       state.refs, state.grid)
        out.append((d_plus - 2.0 * d_mid + d_minus) / delta**2)
    return out


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalReport:
    am: list[float]
    am_q: list[float]
    l_hat: float
    l_coupled: float
    j: list[float]
    j_q: list[float]
    ding: float
    ding_q: float
    z: list[float]

    def decomposition_residue(self) -> float:
        return abs(self.ding_q - (sum(self.z) + self.ding))

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def functional_report(state) -> FunctionalReport:
    grid, k = state.grid, state.spec.k
    am = [aubin_mabuchi(f, grid, i) for i, f in enumerate(state.fs)]
    am_q = [am_quantized(g, r, k) for g, r in zip(state.grams, state.refs)]
    lhat = sum(l_hat(f, grid, i) for i, f in enumerate(state.fs))
    lc = coupled_l(state.fs, grid)
    j = [j_energy(f, grid, i) for i, f in enumerate(state.fs)]
    j_q = [j_quantized(g, r, grid, i)
           for i, (g, r) in enumerate(zip(state.grams, state.refs))]
    return FunctionalReport(
        am=am, am_q=am_q, l_hat=lhat, l_coupled=lc, j=j, j_q=j_q,
        ding=ding(state), ding_q=ding_quantized(state),
        z=[z_gap(state, i) for i in range(state.spec.nfactors)],
    )
