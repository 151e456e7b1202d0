import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ckequant import hermitian as hm
from ckequant.config import TestbedSpec
from ckequant.errors import SingularGram
from ckequant.geometry import build_grid
from ckequant.hermitian import GramForm


def test_bergman_sum_constant_at_reference(p1_spec, p1_grid, p1_ref_state):
    beta = hm.bergman_sum(p1_ref_state.grams[0], p1_grid, 0)
    dim = p1_ref_state.grams[0].dim
    assert np.max(np.abs(beta - dim)) < 1e-12  # binomial identity


def test_bergman_sum_scaling(p1_grid, p1_ref_state):
    g = p1_ref_state.grams[0]
    b1 = hm.bergman_sum(g, p1_grid, 0)
    b2 = hm.bergman_sum(g.scaled(3.0), p1_grid, 0)
    assert np.allclose(b2, b1 / 3.0, rtol=1e-13)


def test_bergman_sum_k1_at_origin():
    spec = TestbedSpec(n=1, degrees=(1, 1), k=1)
    grid = build_grid(spec, 64)
    g = GramForm(grid.bases[0].tag, 2, diag=np.array([1.0, 1.0]))
    beta = hm.bergman_sum(g, grid, 0)
    # at z=0 only the constant section survives: beta -> 1 as t -> 0
    j = np.argmin(grid.t[:, 0])
    assert abs(beta[j] - 1.0) < 1e-2  # first node sits near but not at 0
    t = grid.t[:, 0]
    assert np.allclose(beta, 1.0, atol=1e-12)  # (1+t)^{-1}(1+t) = 1 pointwise


def test_fs_potential_zero_at_reference(p1_grid, p1_ref_state):
    fs = hm.fs_potential(p1_ref_state.grams[0], p1_grid, 0)
    assert np.max(np.abs(fs)) < 1e-13


def test_fs_potential_log_shift(p1_grid, p1_ref_state):
    g = p1_ref_state.grams[0]
    k = p1_grid.spec.k
    f1 = hm.fs_potential(g, p1_grid, 0)
    f2 = hm.fs_potential(g.scaled(2.0), p1_grid, 0)
    assert np.allclose(f2, f1 - np.log(2.0) / k, atol=1e-13)


def test_hilb_reference(p1_spec, p1_grid):
    from math import factorial
    gram = hm.hilb(np.zeros(p1_grid.n_nodes), p1_grid.theta0, p1_grid, 0)
    k = p1_spec.k
    for alpha, val in zip(p1_grid.bases[0].exponents, gram.diag):
        j = alpha[1]
        assert abs(val - factorial(j) * factorial(k - j) / factorial(k + 1)) < 1e-10


def test_hilb_exponential_shift(p1_grid):
    k = p1_grid.spec.k
    phi = np.zeros(p1_grid.n_nodes)
    g1 = hm.hilb(phi, p1_grid.theta0, p1_grid, 0)
    g2 = hm.hilb(phi + 0.3, p1_grid.theta0, p1_grid, 0)
    assert np.allclose(g2.diag, g1.diag * np.exp(-0.3 * k), rtol=1e-12)


def test_hilb_fixed_point_identity(p1_ref_state, p1_grid):
    # hilb(fs(G*), mu(G*)) = G* at the balanced point
    st = p1_ref_state
    g = st.grams[0]
    out = hm.hilb(hm.fs_potential(g, p1_grid, 0), st.mu, p1_grid, 0)
    assert np.max(np.abs(out.diag - g.diag) / g.diag) < 1e-9


def test_hilb_trace_identity(p1_grid, rng):
    # Tr(G^{-1} hilb(fs(G), nu)) = D for any probability nu
    g = GramForm(p1_grid.bases[0].tag, 5,
                 diag=np.exp(rng.uniform(-1, 1, size=5)))
    raw = np.exp(rng.uniform(-0.5, 0.5, size=p1_grid.n_nodes)) * p1_grid.theta0
    nu = raw / p1_grid.integrate(raw)
    out = hm.hilb(hm.fs_potential(g, p1_grid, 0), nu, p1_grid, 0)
    assert abs(np.sum(out.diag / g.diag) - g.dim) < 1e-9


def test_moment_bar_balanced(p1_ref_state, p1_grid):
    mb = hm.moment_bar(p1_ref_state.grams[0], p1_ref_state.mu, p1_grid, 0)
    dim = p1_ref_state.grams[0].dim
    assert np.max(np.abs(dim * mb - 1.0)) < 1e-9


def test_moment_bar_trace_and_scale(p1_grid, rng):
    g = GramForm(p1_grid.bases[0].tag, 5,
                 diag=np.exp(rng.uniform(-1, 1, size=5)))
    mb = hm.moment_bar(g, p1_grid.theta0, p1_grid, 0)
    assert abs(np.sum(mb) - 1.0) < 1e-10
    mb2 = hm.moment_bar(g.scaled(7.0), p1_grid.theta0, p1_grid, 0)
    assert np.allclose(mb, mb2, atol=1e-13)


def test_onb_independence_general(p1_general_state, p1_general_grid):
    # beta via Cholesky solve equals the direct inverse route
    g = p1_general_state.grams[0]
    beta = hm.bergman_sum(g, p1_general_grid, 0)
    v = p1_general_grid.sect[0]
    inv = np.linalg.inv(g.mat)
    direct = np.real(np.einsum("xa,ab,xb->x", v.conj(), inv, v))
    assert np.max(np.abs(beta - direct)) < 1e-12


def test_dist_axioms(p1_ref_state):
    g = p1_ref_state.grams[0]
    k = p1_ref_state.spec.k
    assert hm.dist(g, g, k) == 0.0
    assert abs(hm.dist(g, g.scaled(3.0), k) - np.log(3.0) / k) < 1e-12


@settings(max_examples=25, deadline=None)
@given(c=st.floats(0.1, 10.0))
def test_dist_scale_law(c):
    spec = TestbedSpec(n=1, degrees=(1, 1), k=4)
    grid = build_grid(spec, 64)
    g = hm.reference_gram(spec, 0, grid)
    assert abs(hm.dist(g, g.scaled(c), spec.k) - abs(np.log(c)) / spec.k) < 1e-12


def test_dist_symmetry(p1_ref_state, rng):
    g = p1_ref_state.grams[0]
    h = GramForm(g.basis_tag, g.dim,
                 diag=g.diag * np.exp(rng.uniform(-1, 1, size=g.dim)))
    k = p1_ref_state.spec.k
    assert abs(hm.dist(g, h, k) - hm.dist(h, g, k)) < 1e-12


def test_geodesic_endpoints(p1_ref_state, rng):
    g = p1_ref_state.grams[0]
    a = rng.standard_normal(g.dim)
    assert np.allclose(hm.geodesic(g, a, 0.0).diag, g.diag)
    ident = np.ones(g.dim)
    out = hm.geodesic(g, ident, 1.3)
    assert np.allclose(out.diag, g.diag * np.exp(-1.3), rtol=1e-13)


def test_geodesic_composition(p1_ref_state, rng):
    g = p1_ref_state.grams[0]
    a = rng.standard_normal(g.dim)
    two_steps = hm.geodesic(hm.geodesic(g, a, 0.4), a, 0.25)
    one_step = hm.geodesic(g, a, 0.65)
    assert np.max(np.abs(two_steps.diag - one_step.diag)) < 1e-10


def test_geodesic_speed(p1_ref_state, rng):
    g = p1_ref_state.grams[0]
    k = p1_ref_state.spec.k
    a = rng.standard_normal(g.dim)
    norm = np.linalg.norm(a) / (k * np.sqrt(g.dim))
    t = 0.7
    assert abs(hm.dist(g, hm.geodesic(g, a, t), k) - t * norm) < 1e-12


def test_singular_gram_rejected(p1_grid):
    g = GramForm(p1_grid.bases[0].tag, 5, diag=np.array([1.0, -1.0, 1, 1, 1]))
    with pytest.raises(SingularGram):
        hm.bergman_sum(g, p1_grid, 0)


def test_serialization_roundtrip(p1_ref_state, p1_general_state):
    for g in (p1_ref_state.grams[0], p1_general_state.grams[0]):
        back = GramForm.from_json_dict(g.to_json_dict())
        if g.is_diagonal:
            assert np.allclose(back.diag, g.diag)
        else:
            assert np.allclose(back.mat, g.mat)
