"""Rectified-subspace baseline tests."""

import numpy as np
import pytest

from bionica.baselines import NnpcaState, init_nnpca, nnpca_step, run_nnpca
from bionica.core import NumericalAbortError
from bionica.datasets import SourceConfig, mix, random_mixing_matrix, sample_sparse_uniform
from bionica.metrics import final_error
from bionica.whitening import sample_covariance


def test_init_is_orthogonal_and_deterministic():
    st = init_nnpca(4, seed=0)
    assert np.allclose(st.V @ st.V.T, np.eye(4), atol=1e-12)
    again = init_nnpca(4, seed=0)
    assert np.array_equal(st.V, again.V)
    other = init_nnpca(4, seed=1)
    assert not np.array_equal(st.V, other.V)
    with pytest.raises(ValueError):
        init_nnpca(0, seed=0)


def test_step_matches_manual_update():
    rng = np.random.default_rng(5)
    st = init_nnpca(3, seed=5, eta0=0.05, eta_decay=0.0)
    V0 = st.V.copy()
    h = rng.standard_normal(3)
    y_expected = np.maximum(V0 @ h, 0.0)
    V_expected = V0 + 0.05 * np.outer(y_expected, h - V0.T @ y_expected)
    y = nnpca_step(st, h)
    assert np.allclose(y, y_expected, rtol=1e-12, atol=1e-15)
    assert np.allclose(st.V, V_expected, rtol=1e-12, atol=1e-15)
    assert st.t == 1


def test_identity_weights_pass_nonnegative_inputs_through():
    st = NnpcaState(V=np.eye(3), eta0=0.01)
    h = np.array([0.5, 0.0, 2.0])
    y = nnpca_step(st, h)
    assert np.array_equal(y, h)
    # h = V'y at the fixed point, so the weights do not move
    assert np.array_equal(st.V, np.eye(3))


def test_zero_rate_freezes_weights():
    rng = np.random.default_rng(6)
    st = init_nnpca(3, seed=6, eta0=0.0, eta_decay=0.0)
    V0 = st.V.copy()
    y = nnpca_step(st, rng.standard_normal(3))
    assert np.array_equal(st.V, V0)
    assert np.min(y) >= 0.0


def test_orthogonal_fixed_point():
    # any orthogonal V with nonnegative projections is stationary
    theta = 0.3
    V = np.array([[np.cos(theta), -np.sin(theta)],
                  [np.sin(theta), np.cos(theta)]])
    st = NnpcaState(V=V.copy(), eta0=0.1, eta_decay=0.0)
    h = V.T @ np.array([1.0, 2.0])  # makes Vh = (1, 2) >= 0
    y = nnpca_step(st, h)
    assert np.allclose(y, [1.0, 2.0], atol=1e-12)
    assert np.allclose(st.V, V, atol=1e-13)


def test_step_rejects_wrong_length():
    st = init_nnpca(3, seed=0)
    with pytest.raises(ValueError):
        nnpca_step(st, np.ones(4))


def test_step_aborts_on_blowup():
    st = init_nnpca(2, seed=1, eta0=0.5, eta_decay=0.0)
    with pytest.raises(NumericalAbortError):
        for _ in range(4):
            nnpca_step(st, np.full(2, 1e200))


def test_run_whitens_then_streams():
    S = sample_sparse_uniform(SourceConfig(d=3, T=4000, zero_prob=0.5, seed=2))
    X = mix(random_mixing_matrix(5, 3, 2), S)
    Y, wt, state = run_nnpca(X, 3, seed=2)
    assert Y.shape == (3, 4000)
    assert np.min(Y) >= 0.0
    assert state.t == 4000
    cov = sample_covariance(X).cov
    assert np.max(np.abs(wt.F @ cov @ wt.F.T - np.eye(3))) < 1e-8


def test_run_is_deterministic():
    S = sample_sparse_uniform(SourceConfig(d=2, T=1000, zero_prob=0.5, seed=3))
    X = mix(random_mixing_matrix(2, 2, 3), S)
    Y1, _, _ = run_nnpca(X, 2, seed=3)
    Y2, _, _ = run_nnpca(X, 2, seed=3)
    assert np.array_equal(Y1, Y2)


def test_run_recovers_moderate_instance():
    S = sample_sparse_uniform(SourceConfig(d=3, T=20000, zero_prob=0.5, seed=0))
    A = random_mixing_matrix(3, 3, np.random.default_rng(10000))
    Y, _, _ = run_nnpca(mix(A, S), 3, seed=77777)
    assert final_error(S, Y) < 0.05
