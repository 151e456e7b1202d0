"""Coupled balanced-metric machinery: canonical measure, T-operator, residual,
T-iteration, the balancing flow, and automorphism-drift normalization.

The state of the solver is an immutable snapshot holding the N Gram forms
together with every cache derived from them (Bergman sums, potentials, the
normalized canonical measure, the Hilb images and the residual). A T-step is
just "promote the cached Hilb images to the new Grams", so detecting a fixed
point costs nothing extra.

The coupled measure is evaluated once per step from the incoming state
(simultaneous Jacobi-style update for all factors): the measure couples the
factors through the sum of all potentials at once, so refreshing it between
factors would solve a different fixed-point problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hermitian as hm
from .config import TestbedSpec
from .errors import NormalizationFailure, NotConverged, SpecInvalid, StepRejected
from .geometry import QuadratureGrid, ma_density
from .hermitian import GramForm

@dataclass(frozen=True)
class CoupledState:
    spec: TestbedSpec
    grid: QuadratureGrid
    grams: tuple[GramForm, ...]
    beta: tuple[np.ndarray, ...]
    fs: tuple[np.ndarray, ...]
    mu: np.ndarray
    t_images: tuple[GramForm, ...]
    residual: float
    refs: tuple[GramForm, ...]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(g.dim for g in self.grams)

    def sup_bergman_dev(self) -> float:
        return max(float(np.max(np.abs(b / g.dim - 1.0)))
                   for b, g in zip(self.beta, self.grams))


def canonical_measure(fs_fields, grid: QuadratureGrid, lam: int) -> np.ndarray:
    """Normalized density exp(-lam * sum_i phi_i) theta0^n / (total mass)."""
    expo = -float(lam) * np.sum(fs_fields, axis=0)
    # constants cancel in the normalization; shift for overflow safety only
    expo -= expo.max()
    dens = np.exp(expo) * grid.theta0
    mass = grid.integrate(dens)
    if not np.isfinite(mass) or mass <= 0:
        raise NormalizationFailure(f"canonical measure has mass {mass!r}")
    return dens / mass


def make_state(spec: TestbedSpec, grid: QuadratureGrid,
               grams: tuple[GramForm, ...],
               refs: tuple[GramForm, ...] | None = None) -> CoupledState:
    """Build a state snapshot with all caches consistent with `grams`."""
    if len(grams) != spec.nfactors:
        raise SpecInvalid(f"expected {spec.nfactors} Gram forms, got {len(grams)}")
    if refs is None:
        refs = tuple(hm.reference_gram(spec, i, grid) for i in range(spec.nfactors))
    beta = tuple(hm.bergman_sum(g, grid, i) for i, g in enumerate(grams))
    fs = tuple(np.log(b / g.dim) / spec.k for b, g in zip(beta, grams))
    mu = canonical_measure(fs, grid, spec.lam)
    t_images = tuple(hm.hilb(fs[i], mu, grid, i) for i in range(spec.nfactors))
    res = 0.0
    for g, t in zip(grams, t_images):
        dev = hm.moment_image(g, t)
        if g.is_diagonal:
            res += float(np.sum((1.0 - dev) ** 2)) / g.dim
        else:
            d = dev - np.eye(g.dim)
            res += float(np.real(np.trace(d @ d))) / g.dim
    return CoupledState(spec, grid, tuple(grams), beta, fs, mu, t_images, res, refs)


def coupled_ricci_potential(state: CoupledState, i: int) -> np.ndarray:
    """rho_i = log(mu / MA(phi_i)); all zero exactly at a coupled
    Kahler-Einstein tuple, and exp(rho_i) MA(phi_i) = mu for every i."""
    ma = ma_density(state.grid, state.fs[i], i)
    return np.log(state.mu / ma)


def t_step(state: CoupledState) -> CoupledState:
    """One application of the coupled T-operator (Hilb after FS, shared measure)."""
    return make_state(state.spec, state.grid, state.t_images, state.refs)


def residual(state: CoupledState) -> float:
    """Scale-invariant balanced-condition residual
    sum_i Tr((Id - D_i Mbar_i)^2) / D_i  (the squared gradient norm of the
    quantized Ding functional, in the normalized metric)."""
    return state.residual


# ---------------------------------------------------------------------------
# Normalization against scaling and torus automorphism drift
# ---------------------------------------------------------------------------

def _reduced_exponents(grid: QuadratureGrid, i: int) -> np.ndarray:
    return np.array([e[1:] for e in grid.bases[i].exponents], dtype=float)


def torus_moment(state: CoupledState, i: int) -> np.ndarray:
    """Centered first moment of the exponent lattice under the weights
    ref_alpha / G_alpha (uniform exactly on the reference orbit)."""
    g, ref = state.grams[i], state.refs[i]
    if g.is_diagonal:
        p = ref.diag / g.diag
    else:
        p = np.real(np.diag(ref.mat)) / np.real(np.diag(g.mat))
    p = p / p.sum()
    al = _reduced_exponents(state.grid, i)
    return al.T @ p - al.mean(axis=0)


def normalize(state: CoupledState, mode: str) -> CoupledState:
    """scale_fix: rescale each factor to det(G ref^{-1}) = 1.
    torus_recenter: conjugate by the diagonal automorphism killing the
    weighted exponent first moment (the torus-orbit drift) per factor.
    """
    if mode == "scale_fix":
        grams = []
        for g, ref in zip(state.grams, state.refs):
            if g.is_diagonal:
                s = float(np.exp(np.mean(np.log(ref.diag) - np.log(g.diag))))
            else:
                sign, ld_g = np.linalg.slogdet(g.mat)
                _, ld_r = np.linalg.slogdet(ref.mat)
                if sign <= 0:
                    raise NormalizationFailure("Gram determinant not positive")
                s = float(np.exp((ld_r - ld_g) / g.dim))
            grams.append(g.scaled(s))
        return make_state(state.spec, state.grid, tuple(grams), state.refs)
    if mode == "torus_recenter":
        # one torus automorphism acts on every polarization at once, tilting
        # the Gram of factor i by exp(<xi, alpha>) on its own exponent lattice;
        # a per-factor xi would not be an automorphism pullback and would not
        # preserve the residual
        nf = state.spec.nfactors
        als, logp0s, targets = [], [], []
        for i, (g, ref) in enumerate(zip(state.grams, state.refs)):
            al = _reduced_exponents(state.grid, i)
            als.append(al)
            targets.append(al.mean(axis=0))
            gd = g.diag if g.is_diagonal else np.real(np.diag(g.mat))
            rd = ref.diag if ref.is_diagonal else np.real(np.diag(ref.mat))
            logp0s.append(np.log(rd) - np.log(gd))
        xi = np.zeros(als[0].shape[1])
        for _ in range(80):  # Newton on the summed moment map; concave
            mom = np.zeros_like(xi)
            cov = np.zeros((len(xi), len(xi)))
            for al, logp0, target in zip(als, logp0s, targets):
                logp = logp0 - al @ xi
                p = np.exp(logp - logp.max())
                p /= p.sum()
                mean = al.T @ p
                mom += mean - target
                cov += (al.T * p) @ al - np.outer(mean, mean)
            if np.max(np.abs(mom)) < 1e-14:
                break
            xi += np.linalg.solve(cov, mom)
        grams = []
        for g, al in zip(state.grams, als):
            tilt = np.exp(al @ xi)
            if g.is_diagonal:
                grams.append(GramForm(g.basis_tag, g.dim, diag=g.diag * tilt))
            else:
                grams.append(hm.gram_from_matrix(
                    g.basis_tag, g.mat * np.outer(np.sqrt(tilt), np.sqrt(tilt))))
        return make_state(state.spec, state.grid, tuple(grams), state.refs)
    raise SpecInvalid(f"unknown normalization mode {mode!r}")


# ---------------------------------------------------------------------------
# T-iteration and balancing flow
# ---------------------------------------------------------------------------

class FlowTrace:
    """Append-only per-step record; serializes to the declared CSV schema."""

    def __init__(self, nfactors: int):
        self.nfactors = nfactors
        self.rows: list[tuple] = []

    def append(self, it, t, res, ding_q, am_q, dist_step, sup_dev):
        self.rows.append((it, t, res, ding_q, tuple(am_q), dist_step, sup_dev))

    def header(self) -> list[str]:
        return (["iter", "t", "residual", "ding_q"]
                + [f"am_q_{i + 1}" for i in range(self.nfactors)]
                + ["dist_step", "sup_bergman_dev"])

    def table(self) -> list[list]:
        out = []
        for it, t, res, ding_q, am_q, dist_step, sup_dev in self.rows:
            out.append([it, t, res, ding_q, *am_q, dist_step, sup_dev])
        return out

    def column(self, name: str) -> list:
        idx = self.header().index(name)
        return [row[idx] for row in self.table()]


def _product_dist(a: tuple[GramForm, ...], b: tuple[GramForm, ...], k: int) -> float:
    return float(np.sqrt(sum(hm.dist(x, y, k) ** 2 for x, y in zip(a, b))))


def _trace_row(trace, it, t, state, dist_step):
    from .functionals import am_quantized, ding_quantized
    am_q = [am_quantized(g, ref, state.spec.k)
            for g, ref in zip(state.grams, state.refs)]
    trace.append(it, t, state.residual, ding_quantized(state), am_q,
                 dist_step, state.sup_bergman_dev())


def iterate_to_balance(state: CoupledState, max_iter: int, tol_res: float,
                       recenter_on_drift: bool = True,
                       drift_factor: float = 1e3):
    """Iterate the T-operator until the residual drops below tol_res.

    Per-iteration torus recentering only kicks in when the first-moment drift
    monitor exceeds `drift_factor` times its initial size; the fixed orbit is
    neutrally stable, so drift is usually static.
    """
    if tol_res <= 0:
        raise SpecInvalid("tol_res must be positive")
    trace = FlowTrace(state.spec.nfactors)
    drift0 = max(max(np.max(np.abs(torus_moment(state, i))), 1e-12)
                 for i in range(state.spec.nfactors))
    prev = state
    for it in range(max_iter + 1):
        dist_step = 0.0 if it == 0 else _product_dist(prev.grams, state.grams,
                                                      state.spec.k)
        _trace_row(trace, it, float(it), state, dist_step)
        if state.residual < tol_res:
            return state, trace
        if recenter_on_drift and state.grid.mode == "torus_invariant":
            drift = max(np.max(np.abs(torus_moment(state, i)))
                        for i in range(state.spec.nfactors))
            if drift > drift_factor * drift0:
                state = normalize(state, "torus_recenter")
        prev, state = state, t_step(state)
    raise NotConverged(
        f"T-iteration residual {state.residual:.3e} >= {tol_res:.1e} "
        f"after {max_iter} iterations", trace)


def balancing_flow(state: CoupledState, step_h: float, t_end: float,
                   tol_res: float = 0.0, max_halvings: int = 10):
    """Geodesic Euler discretization of the gradient flow of the quantized
    Ding functional: each factor moves from G toward its Hilb image with rate
    k. Steps that increase the functional beyond 1e-12 are halved and retried;
    the functional is nonincreasing along every accepted step.
    """
    k = state.spec.k
    if step_h * k > 1.0 + 1e-12:
        raise SpecInvalid(f"flow step h={step_h} violates the h*k <= 1 stability bound")
    from .functionals import ding_quantized
    trace = FlowTrace(state.spec.nfactors)
    t = 0.0
    it = 0
    _trace_row(trace, it, t, state, 0.0)
    ding_cur = ding_quantized(state)
    h = step_h
    while t < t_end - 1e-12 and not (tol_res > 0 and state.residual < tol_res):
        h_try = min(h, t_end - t)
        for attempt in range(max_halvings + 1):
            grams = tuple(hm.flow_step(g, timg, h_try * k)
                          for g, timg in zip(state.grams, state.t_images))
            cand = make_state(state.spec, state.grid, grams, state.refs)
            ding_new = ding_quantized(cand)
            if ding_new <= ding_cur + 1e-12:
                break
            if attempt == max_halvings:
                raise StepRejected(
                    f"Ding increased by {ding_new - ding_cur:.3e} even after "
                    f"{max_halvings} halvings of h")
            h_try /= 2.0
            h = h_try  # stay conservative once a rejection occurred
        dist_step = _product_dist(state.grams, cand.grams, k)
        state, ding_cur = cand, ding_new
        t += h_try
        it += 1
        _trace_row(trace, it, t, state, dist_step)
    return state, trace


def perturbed_start(state: CoupledState, rng: np.random.Generator,
                    factor_range: float = 2.0) -> CoupledState:
    """Random diagonal perturbation of each Gram by factors in
    [1/factor_range, factor_range] (log-uniform); the standard seeded start."""
    grams = []
    for g in state.grams:
        f = np.exp(rng.uniform(-np.log(factor_range), np.log(factor_range),
                               size=g.dim))
        if g.is_diagonal:
            grams.append(GramForm(g.basis_tag, g.dim, diag=g.diag * f))
        else:
            sq = np.sqrt(f)
            grams.append(hm.gram_from_matrix(g.basis_tag,
                                             g.mat * np.outer(sq, sq)))
    return make_state(state.spec, state.grid, tuple(grams), state.refs)


def reference_state(spec: TestbedSpec, grid: QuadratureGrid) -> CoupledState:
    refs = tuple(hm.reference_gram(spec, i, grid) for i in range(spec.nfactors))
    return make_state(spec, grid, refs, refs)
