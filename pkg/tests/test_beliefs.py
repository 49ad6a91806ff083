import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratemap.beliefs import (
    Belief,
    compressed_cov_update,
    marginal_blocks,
    own_cov_update,
    project_estimate,
    save_belief,
    update_compressed,
    update_own,
)
from ratemap.oracles import information_form_posterior, random_pd
from ratemap.rdcomp import CompressionPlan


def scalar_plan(theta, n_var):
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    deltas = np.sqrt(12.0 * np.atleast_1d(np.asarray(n_var, dtype=float)))
    return CompressionPlan(deltas, theta.shape[1], basis=theta)


def test_scalar_kalman():
    b = update_own(Belief([0.5], [[1.0]]), [0], [1.0], 1.0)
    assert b.mean[0] == pytest.approx(0.75)
    assert b.cov[0, 0] == pytest.approx(0.5)


def test_uninformative_measurement():
    prior = Belief(np.array([0.2, 0.7]), np.array([[1.0, 0.3], [0.3, 2.0]]))
    b = update_own(prior, [0, 1], [5.0, -5.0], 1e12)
    np.testing.assert_allclose(b.mean, prior.mean, atol=1e-6)
    np.testing.assert_allclose(b.cov, prior.cov, atol=1e-6)


def test_block_independence():
    b = update_own(Belief.isotropic(0.5, 1.0, d=2), [0], [0.1], 0.01)
    assert b.cov[1, 1] == 1.0
    assert b.cov[0, 1] == 0.0 and b.cov[1, 0] == 0.0
    assert b.mean[1] == 0.5


def test_diagonal_storage_matches_dense():
    rng = np.random.default_rng(0)
    mean = rng.random(6)
    sel = np.array([1, 4, 5])
    y = rng.random(3)
    dense = update_own(Belief.isotropic(mean, 0.3), sel, y, 0.02)
    diag = update_own(Belief.isotropic(mean, 0.3, diagonal=True), sel, y, 0.02)
    np.testing.assert_allclose(diag.mean, dense.mean, atol=1e-15)
    np.testing.assert_allclose(np.diag(dense.cov), diag.cov, atol=1e-15)


def test_gain_form_matches_information_form():
    rng = np.random.default_rng(5)
    for _ in range(20):
        d = int(rng.integers(2, 9))
        cov = random_pd(rng, d)
        sel = np.sort(rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False))
        _, post = own_cov_update(cov, sel, 0.05)
        ref = information_form_posterior(cov, np.eye(d)[sel], 0.05 * np.eye(sel.size))
        np.testing.assert_allclose(post, ref, atol=1e-10)


def test_rank_zero_plan_leaves_belief():
    prior = Belief.isotropic(0.5, 1.0, d=3)
    b = update_compressed(prior, np.arange(3), CompressionPlan.empty(3), np.zeros(0))
    assert b is prior


def test_scalar_compressed_update():
    b = update_compressed(Belief([0.0], [[1.0]]), [0], scalar_plan([[1.0]], 1.0), [1.0])
    assert b.mean[0] == pytest.approx(0.5)
    assert b.cov[0, 0] == pytest.approx(0.5)


def test_scale_invariance():
    rng = np.random.default_rng(2)
    cov = random_pd(rng, 4)
    prior = Belief(rng.random(4), cov)
    sel = np.array([0, 2, 3])
    theta = rng.standard_normal((2, 3))
    n = np.array([0.3, 0.7])
    y = rng.standard_normal(2)
    a = update_compressed(prior, sel, scalar_plan(theta, n), y)
    s = 3.0
    b = update_compressed(prior, sel, scalar_plan(s * theta, s**2 * n), s * y)
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
    np.testing.assert_allclose(a.cov, b.cov, atol=1e-12)


def test_compressed_matches_information_form():
    rng = np.random.default_rng(7)
    cov = random_pd(rng, 6)
    sel = np.array([1, 2, 4])
    theta = rng.standard_normal((2, 3))
    n = np.array([0.2, 0.5])
    _, post = compressed_cov_update(cov, sel, scalar_plan(theta, n))
    h = np.zeros((2, 6))
    h[:, sel] = theta
    np.testing.assert_allclose(post, information_form_posterior(cov, h, np.diag(n)), atol=1e-10)


def test_plan_dimension_mismatch():
    with pytest.raises(ValueError):
        update_compressed(Belief.isotropic(0.0, 1.0, d=3), [0, 1], scalar_plan(np.ones((1, 3)), 1.0), [0.0])


def test_marginal_blocks_examples():
    b = marginal_blocks(Belief.isotropic(0.0, 1.0, d=4), [1, 3])
    np.testing.assert_array_equal(b.p_bb, np.eye(2))
    np.testing.assert_array_equal(b.p_ob, np.zeros((2, 2)))
    np.testing.assert_array_equal(b.p_oo, np.eye(2))
    b = marginal_blocks(Belief([0, 0], [[1.0, 0.5], [0.5, 2.0]]), [1])
    assert b.p_bb.tolist() == [[2.0]] and b.p_ob.tolist() == [[0.5]] and b.p_oo.tolist() == [[1.0]]
    cov = random_pd(np.random.default_rng(0), 3)
    b = marginal_blocks(Belief(np.zeros(3), cov), [0, 1, 2])
    np.testing.assert_array_equal(b.p_bb, cov)
    assert b.p_ob.size == 0 and b.p_oo.size == 0


def test_project_estimate():
    np.testing.assert_array_equal(project_estimate(Belief([1.3, -0.2, 0.42], np.eye(3))), [1.0, 0.0, 0.42])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 7))
def test_updates_keep_covariance_psd_and_shrinking(seed, d):
    rng = np.random.default_rng(seed)
    cov = random_pd(rng, d)
    sel = np.sort(rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False))
    _, plus = own_cov_update(cov, sel, 0.01)
    theta = rng.standard_normal((int(rng.integers(1, sel.size + 1)), sel.size))
    _, nxt = compressed_cov_update(plus, sel, scalar_plan(theta, rng.uniform(0.01, 1, theta.shape[0])))
    for a in (plus, nxt):
        assert np.abs(a - a.T).max() <= 1e-10
        assert np.linalg.eigvalsh(a).min() >= -1e-9
    assert np.linalg.eigvalsh(cov - plus).min() >= -1e-8
    assert np.linalg.eigvalsh(plus - nxt).min() >= -1e-8


def test_save_belief(tmp_path):
    b = Belief(np.array([0.0, 0.5, 1.2, -0.1]), np.diag([1.0, 2.0, 3.0, 4.0]))
    save_belief(b, (2, 2), tmp_path / "snap")
    assert (tmp_path / "snap.pgm").exists()
    var = np.loadtxt(tmp_path / "snap_var.csv", delimiter=",")
    np.testing.assert_array_equal(var, [[1, 2], [3, 4]])
