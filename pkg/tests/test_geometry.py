import math
from itertools import combinations

import numpy as np
import pytest

from qembed import ensembles as E
from qembed import geometry as G

SQ2PI = math.sqrt(2.0 / math.pi)


def test_membership_of_samples():
    rng = np.random.default_rng(0)
    specs = [
        G.FiniteSet(points=rng.standard_normal((5, 3))),
        G.SparseBall(n=16, k=3, radius=1.0),
        G.LowRankBall(n1=4, n2=4, r=1, radius=2.0),
        G.EuclideanBall(n=6, radius=0.8),
    ]
    for spec in specs:
        for seed in range(10):
            p = G.sample_point(spec, seed)
            assert G.contains(spec, p)


def test_finite_singleton_sampling():
    p = np.array([[1.0, 2.0]])
    spec = G.FiniteSet(points=p)
    assert np.array_equal(G.sample_point(spec, 0), p[0])


def test_sparse_sample_respects_support_and_radius():
    spec = G.SparseBall(n=16, k=3, radius=1.0)
    p = G.sample_point(spec, 1)
    assert np.sum(p != 0) <= 3
    assert np.linalg.norm(p) <= 1.0


def test_lowrank_sample_rank_and_norm():
    spec = G.LowRankBall(n1=4, n2=4, r=1, radius=2.0)
    p = G.sample_point(spec, 2).reshape(4, 4)
    assert np.linalg.matrix_rank(p, tol=1e-9) <= 1
    assert np.linalg.norm(p) <= 2.0


def test_sup_oracle_euclidean_ball():
    spec = G.EuclideanBall(n=5, radius=1.0)
    g = np.arange(5.0)
    assert G.sup_oracle(spec, g) == pytest.approx(np.linalg.norm(g))


def test_sup_oracle_sparse_vs_enumeration():
    rng = np.random.default_rng(3)
    for n in range(4, 11):
        for k in (1, 2, min(3, n)):
            spec = G.SparseBall(n=n, k=k, radius=1.0)
            for _ in range(4):
                g = rng.standard_normal(n)
                brute = max(np.linalg.norm(g[list(s)]) for s in combinations(range(n), k))
                assert G.sup_oracle(spec, g) == pytest.approx(brute, abs=1e-12)


def test_sup_oracle_sparse_with_basis():
    n = 8
    basis = G.dct_basis(n).T  # columns orthonormal
    spec = G.SparseBall(n=n, k=2, radius=1.5)
    spec_rot = G.SparseBall(n=n, k=2, radius=1.5, basis=basis)
    rng = np.random.default_rng(4)
    g = rng.standard_normal(n)
    # sup over rotated set equals sup of rotated-back gaussian over the plain set
    assert G.sup_oracle(spec_rot, g) == pytest.approx(G.sup_oracle(spec, basis.T @ g), abs=1e-12)


def test_sup_oracle_lowrank_full_rank_is_frobenius():
    spec = G.LowRankBall(n1=3, n2=3, r=3, radius=1.0)
    rng = np.random.default_rng(5)
    g = rng.standard_normal(9)
    assert G.sup_oracle(spec, g) == pytest.approx(np.linalg.norm(g), abs=1e-9)


def test_sup_oracle_dimension_mismatch():
    with pytest.raises(E.InvalidArgument):
        G.sup_oracle(G.EuclideanBall(n=3, radius=1.0), np.zeros(4))


def test_width_finite_singleton():
    u = np.array([0.3, -0.4, 1.2])
    est = G.width_estimate(G.FiniteSet(points=u[None, :]), 20_000, 0)
    assert abs(est.mean - SQ2PI * np.linalg.norm(u)) <= 3 * est.stderr


def test_width_euclidean_ball_2d():
    est = G.width_estimate(G.EuclideanBall(n=2, radius=1.0), 30_000, 1)
    assert abs(est.mean - math.sqrt(math.pi / 2)) <= 3 * est.stderr


def test_width_sparse_log_bound():
    for n, k in ((64, 4), (128, 2)):
        est = G.width_estimate(G.SparseBall(n=n, k=k, radius=1.0), 4000, n)
        c_fit = est.mean**2 / (k * math.log(2 * n / k))
        assert c_fit <= 4.0


def test_width_properties_homogeneity_and_diameter():
    spec = G.SparseBall(n=12, k=2, radius=1.0)
    rep = G.width_properties_check(spec, lam=2.5, shift=None, draws=2000, seed=2)
    assert rep.homogeneity_max_dev <= 1e-9
    assert rep.diameter_lower_ok and rep.diameter_upper_ok


def test_width_properties_translation_finite():
    rng = np.random.default_rng(6)
    pts = rng.standard_normal((6, 4))
    t = np.array([0.5, 0.0, -0.3, 0.1])
    rep = G.width_properties_check(G.FiniteSet(points=pts), lam=1.0, shift=t,
                                   draws=4000, seed=3)
    assert rep.translation_gap <= rep.translation_bound
    rep0 = G.width_properties_check(G.FiniteSet(points=pts), lam=1.0, shift=np.zeros(4),
                                    draws=500, seed=4)
    assert rep0.translation_gap == 0.0


def test_entropy_bound_finite_set():
    pts = np.eye(8)
    assert G.entropy_bound(G.FiniteSet(points=pts), 1e-3) <= math.log(8) + 1e-12


def test_entropy_bound_sparse_formula():
    spec = G.SparseBall(n=64, k=2, radius=1.0)
    expected = 2 * math.log(32 * math.e * 21)
    assert G.entropy_bound(spec, 0.1) == pytest.approx(expected, rel=1e-12)
    # eta beyond the radius: constant-size net per support
    assert G.entropy_bound(spec, 1.5) <= 2 * math.log(3 * math.e * 32)


def test_structured_constants_invariant_on_grid():
    spec = G.SparseBall(n=64, k=2, radius=1.0)
    sc = G.structured_constants(spec, np.geomspace(0.01, 1.0, 12))
    d = G.diameter(spec)
    for eta, h in zip(sc.eta_grid, sc.entropy_values):
        assert h <= sc.w_bar_sq_bound * math.log(1 + d / eta) + 1e-9
    assert sc.inflation >= 1.0


def test_empirical_net_cover_property():
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((100, 2))
    pts /= np.maximum(1.0, np.linalg.norm(pts, axis=1))[:, None]
    net, log_size = G.empirical_net(pts, 0.5)
    dists = np.min(np.linalg.norm(pts[:, None, :] - net[None, :, :], axis=2), axis=1)
    assert np.all(dists <= 0.5)
    assert log_size == math.log(len(net))


def test_empirical_net_degenerate_cases():
    pts = np.array([[0.0, 0.0], [0.25, 0.0], [0.5, 0.0]])
    net, _ = G.empirical_net(pts, 0.5)
    assert len(net) <= 2
    one, _ = G.empirical_net(pts, 10.0)
    assert len(one) == 1
    with pytest.raises(E.InvalidArgument):
        G.empirical_net(np.zeros((0, 2)), 0.5)


def test_anti_sparsity_levels():
    assert G.anti_sparsity(np.array([1.0, 0.0, 0.0]), 1.0).level == 1.0
    assert G.anti_sparsity(np.array([1.0, 1.0, 0.0]), 2.0).level == 2.0
    rep = G.anti_sparsity(np.ones(10), 10.0)
    assert rep.level == pytest.approx(10.0) and rep.passed
    with pytest.raises(E.InvalidArgument):
        G.anti_sparsity(np.zeros(3), 1.0)


def test_anti_sparsity_level_range():
    rng = np.random.default_rng(8)
    for _ in range(50):
        u = rng.standard_normal(12)
        lvl = G.anti_sparsity_level(u)
        assert 1.0 <= lvl <= 12.0


def test_rotate_antisparsify():
    v, before, after = G.rotate_antisparsify(np.ones(16))
    assert np.linalg.norm(v) == pytest.approx(4.0, abs=1e-9)
    # sparse input: the rotation spreads energy
    e1 = np.zeros(64)
    e1[0] = 1.0
    v, before, after = G.rotate_antisparsify(e1)
    assert before == 1.0
    col = G.dct_basis(64)[:, 0]
    assert after == pytest.approx(np.dot(col, col) / np.max(np.abs(col)) ** 2, abs=1e-9)
    assert after > 30.0
    rng = np.random.default_rng(9)
    u = rng.standard_normal(33)
    v, _, _ = G.rotate_antisparsify(u)
    assert np.linalg.norm(v) == pytest.approx(np.linalg.norm(u), abs=1e-9)


def test_dct_basis_orthonormal():
    mat = G.dct_basis(17)
    assert np.allclose(mat @ mat.T, np.eye(17), atol=1e-12)


def test_minimal_m_eps_scaling():
    spec = G.SparseBall(n=32, k=2, radius=1.0)
    m1 = G.minimal_m(spec, "embed-general", 0.2, 0.5, 1.0, draws=2000, seed=0)
    m2 = G.minimal_m(spec, "embed-general", 0.1, 0.5, 1.0, draws=2000, seed=0)
    assert m2 / m1 == pytest.approx(32.0, rel=0.01)
    s1 = G.minimal_m(spec, "width-structured", 0.2, 0.5, 1.0)
    s2 = G.minimal_m(spec, "width-structured", 0.1, 0.5, 1.0)
    assert 2.0 < s2 / s1 < 3.0


def test_minimal_m_validation():
    spec = G.SparseBall(n=32, k=2, radius=1.0)
    with pytest.raises(E.InvalidArgument):
        G.minimal_m(spec, "embed-general", 1.5, 0.5, 1.0)
    with pytest.raises(E.InvalidArgument):
        G.minimal_m(spec, "embed-general", 0.2, 0.5, 0.0)
    with pytest.raises(E.InvalidArgument):
        G.minimal_m(spec, "embed-sideways", 0.2, 0.5, 1.0)
    with pytest.raises(E.InvalidArgument):
        G.minimal_m(G.EuclideanBall(n=4, radius=1.0), "embed-structured", 0.2, 0.5, 1.0)


def test_ball_mesh():
    mesh = G.ball_mesh(3, 0.5)
    assert np.all(np.linalg.norm(mesh.points, axis=1) <= 1.0 + 1e-12)
    assert len(mesh.points) > 20
    assert G.diameter(mesh) <= 1.0 + 1e-12
