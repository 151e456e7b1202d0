import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ckequant import functionals as fn
from ckequant import solver
from ckequant.config import TestbedSpec
from ckequant.geometry import build_grid

def smooth_field(grid, scale=0.1, which=0):
    u = grid.t[:, 0] / (1.0 + grid.t[:, 0])
    shapes = [u**2, u**3 - 0.4 * u, np.sin(np.pi * u) * 0.5]
    return scale * shapes[which % len(shapes)]


def test_am_zero(p1_grid):
    assert fn.aubin_mabuchi(np.zeros(p1_grid.n_nodes), p1_grid, 0) == 0.0


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-2.0, 2.0))
def test_am_shift(c):
    spec = TestbedSpec(n=1, degrees=(1, 1), k=4)
    grid = build_grid(spec, 64)
    phi = smooth_field(grid)
    a1 = fn.aubin_mabuchi(phi, grid, 0)
    a2 = fn.aubin_mabuchi(phi + c, grid, 0)
    # unit-volume normalization: AM(phi + c) = AM(phi) + c
    assert abs(a2 - (a1 + c)) < 1e-9


def test_am_first_variation(p1_grid):
    phi = smooth_field(p1_grid)
    eps = 1e-5
    fd = (fn.aubin_mabuchi(eps * phi, p1_grid, 0)
          - fn.aubin_mabuchi(-eps * phi, p1_grid, 0)) / (2 * eps)
    # d/dt AM(t phi)|_0 = int phi MA(0)
    assert abs(fd - p1_grid.integrate(phi * p1_grid.theta0)) < 1e-8


def test_am_shift_p2(p2_grid):
    t1, t2 = p2_grid.t[:, 0], p2_grid.t[:, 1]
    phi = 0.05 * t1 / (1 + t1 + t2)
    a1 = fn.aubin_mabuchi(phi, p2_grid, 1)
    a2 = fn.aubin_mabuchi(phi + 0.3, p2_grid, 1)
    assert abs(a2 - (a1 + 0.3)) < 1e-6


def test_coupled_l(p1_grid):
    zero = [np.zeros(p1_grid.n_nodes)] * 2
    assert abs(fn.coupled_l(zero, p1_grid)) < 1e-12
    phi = [smooth_field(p1_grid, 0.2, 0), smooth_field(p1_grid, 0.1, 1)]
    shifted = [p + c for p, c in zip(phi, (0.4, -0.9))]
    assert abs(fn.coupled_l(shifted, p1_grid)
               - (fn.coupled_l(phi, p1_grid) + 0.4 - 0.9)) < 1e-10


def test_ding_zero_at_balanced(p1_ref_state):
    assert abs(fn.ding_quantized(p1_ref_state)) < 1e-12
    assert abs(fn.ding(p1_ref_state)) < 1e-10


def test_ding_scale_invariance(p1_ref_state, rng):
    st = solver.perturbed_start(p1_ref_state, rng, 2.0)
    grams = tuple(g.scaled(c) for g, c in zip(st.grams, (3.0, 0.25)))
    st2 = solver.make_state(st.spec, st.grid, grams, st.refs)
    assert abs(fn.ding_quantized(st2) - fn.ding_quantized(st)) < 1e-12


def test_gradient_consistency(p1_ref_state, rng):
    # |dD/dt - k<A, D Mbar - Id>| small for random states and directions
    for _ in range(10):
        st = solver.perturbed_start(p1_ref_state, rng, 1.8)
        dirs = fn.random_directions(st, rng)
        dt = 1e-4
        fd = (fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, dt),
                                      st.refs, st.grid)
              - fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, -dt),
                                        st.refs, st.grid)) / (2 * dt)
        pred = fn.ding_directional(st, dirs)
        assert abs(fd - pred) / max(1.0, abs(pred)) < 1e-2


def test_gradient_consistency_general(p1_general_state, rng):
    st = p1_general_state
    dirs = fn.random_directions(st, rng)
    dt = 1e-4
    fd = (fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, dt), st.refs, st.grid)
          - fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, -dt), st.refs,
                                    st.grid)) / (2 * dt)
    pred = fn.ding_directional(st, dirs)
    assert abs(fd - pred) < 1e-6  # balanced point: both near zero


def test_convexity_probe(p1_general_state, rng):
    st = p1_general_state
    vals = fn.convexity_probe(st, 20, rng)
    assert all(v >= -1e-8 for v in vals)


def test_convexity_scaling_direction_flat(p1_ref_state):
    st = p1_ref_state
    dirs = [np.ones(g.dim) for g in st.grams]
    delta = 1e-2
    d_plus = fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, delta),
                                     st.refs, st.grid)
    d_minus = fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, -delta),
                                      st.refs, st.grid)
    second = (d_plus - 2 * fn.ding_quantized(st) + d_minus) / delta**2
    assert abs(second) < 1e-10


def test_first_differences_vanish_at_balanced(p1_ref_state, rng):
    st = p1_ref_state
    for _ in range(5):
        dirs = fn.random_directions(st, rng)
        delta = 1e-4
        d_plus = fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, delta),
                                         st.refs, st.grid)
        d_minus = fn.ding_quantized_grams(fn.geodesic_shift(st, dirs, -delta),
                                          st.refs, st.grid)
        assert abs(d_plus - d_minus) / (2 * delta) < 1e-8


def test_z_gap_and_decomposition(p1_ref_state, rng):
    st = solver.perturbed_start(p1_ref_state, rng, 1.5)
    rep = fn.functional_report(st)
    assert rep.decomposition_residue() < 1e-10
    assert all(np.isfinite(z) for z in rep.z)


def test_z_gap_scale_invariant(p1_ref_state, rng):
    st = solver.perturbed_start(p1_ref_state, rng, 1.5)
    z0 = fn.z_gap(st, 0)
    grams = tuple(g.scaled(2.5) for g in st.grams)
    st2 = solver.make_state(st.spec, st.grid, grams, st.refs)
    assert abs(fn.z_gap(st2, 0) - z0) < 1e-9


def test_decomposition_along_iteration(p1_ref_state, rng):
    st = solver.perturbed_start(p1_ref_state, rng, 2.0)
    for _ in range(5):
        rep = fn.functional_report(st)
        assert rep.decomposition_residue() < 1e-10
        st = solver.t_step(st)


def test_ding_local_minimality(p1_ref_state, p1_grid, rng):
    # continuum Ding at the CKE gauge is a local minimum among smooth probes
    base = fn.ding_continuum([np.zeros(p1_grid.n_nodes)] * 2, p1_grid)
    assert abs(base) < 1e-12
    for j in range(6):
        phi = [smooth_field(p1_grid, 0.05 * (j + 1) / 6, j),
               smooth_field(p1_grid, -0.04, j + 1)]
        assert fn.ding_continuum(phi, p1_grid) >= base - 1e-10


def test_report_serializes(p1_ref_state):
    rep = fn.functional_report(p1_ref_state)
    import json
    parsed = json.loads(rep.to_json())
    assert set(parsed) == {"am", "am_q", "l_hat", "l_coupled", "j", "j_q",
                           "ding", "ding_q", "z"}
