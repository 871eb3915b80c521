import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lstmrom.nn import DimensionError
from lstmrom.pod import (
    PODBasis,
    SnapshotMatrix,
    apply_scaling,
    compute_rpod_basis,
    fit_scaling,
    invert_scaling,
    lift,
    project,
    randomized_svd,
)


def _snap(A, n_channels=1):
    return SnapshotMatrix(A, A.shape[0] // n_channels, n_channels, 1, A.shape[1])


def _orth_error(V):
    return np.abs(V.T @ V - np.eye(V.shape[1])).max()


@pytest.mark.parametrize("shape,N", [((200, 100), 20), ((50, 300), 10), ((30, 30), 30)])
def test_basis_orthonormal(rng, shape, N):
    basis = compute_rpod_basis(_snap(rng.normal(size=shape)), N, seed=1)
    assert _orth_error(basis.V) <= 1e-10
    assert np.all(np.diff(basis.singular_values) <= 0)


def test_orthonormal_columns_reconstruct_exactly(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(40, 6)))
    basis = compute_rpod_basis(_snap(Q), 6, seed=0)
    assert np.linalg.norm(Q - basis.V @ (basis.V.T @ Q)) <= 1e-10


def test_rank_five_recovery(rng):
    S = rng.normal(size=(200, 5)) @ rng.normal(size=(5, 100))
    basis = compute_rpod_basis(_snap(S), 8, seed=3)
    assert np.linalg.norm(S - basis.V @ (basis.V.T @ S)) <= 1e-8


def test_energy_within_five_percent_of_exact_svd(rng):
    S = rng.normal(size=(200, 100))
    basis = compute_rpod_basis(_snap(S), 20, seed=4)
    s = np.linalg.svd(S, compute_uv=False)
    residual = np.linalg.norm(S - basis.V @ (basis.V.T @ S)) ** 2
    assert residual <= 1.05 * np.sum(s[20:] ** 2)
    assert np.sum(basis.singular_values**2) >= 0.95 * np.sum(s[:20] ** 2)


def test_decaying_spectrum_singular_values_match(rng):
    U, _ = np.linalg.qr(rng.normal(size=(120, 60)))
    W, _ = np.linalg.qr(rng.normal(size=(80, 60)))
    sv = 2.0 ** -np.arange(60)
    S = (U * sv) @ W.T
    _, s, _ = randomized_svd(S, 10, seed=0)
    np.testing.assert_allclose(s, sv[:10], rtol=1e-8)


def test_projection_error_non_increasing_in_N(rng):
    S = _snap(rng.normal(size=(60, 40)) @ np.diag(0.8 ** np.arange(40)) @ rng.normal(size=(40, 40)))
    errs = []
    for N in range(1, 30, 3):
        V = compute_rpod_basis(S, N, seed=7).V
        errs.append(np.linalg.norm(S.data - V @ (V.T @ S.data)))
    assert all(b <= a * (1 + 1e-9) for a, b in zip(errs, errs[1:]))


def test_rank_bound_error(rng):
    with pytest.raises(DimensionError):
        compute_rpod_basis(_snap(rng.normal(size=(10, 5))), 6)
    with pytest.raises(DimensionError):
        compute_rpod_basis(_snap(rng.normal(size=(10, 5))), 0)


def test_two_channel_blocks_are_independent(rng):
    A = rng.normal(size=(30, 20))
    B = rng.normal(size=(30, 20))
    basis = compute_rpod_basis(_snap(np.vstack([A, B]), n_channels=2), 4, seed=0)
    assert basis.V.shape == (60, 8)
    assert np.all(basis.V[:30, 4:] == 0) and np.all(basis.V[30:, :4] == 0)
    assert _orth_error(basis.V) <= 1e-10


def test_seed_determinism(rng):
    S = _snap(rng.normal(size=(50, 40)))
    a = compute_rpod_basis(S, 5, seed=11).V
    b = compute_rpod_basis(S, 5, seed=11).V
    assert np.array_equal(a, b)


# ------------------------------------------------------------ projection


def test_in_span_round_trip(rng):
    V, _ = np.linalg.qr(rng.normal(size=(20, 4)))
    basis = PODBasis(V, np.ones(4), 4)
    u = V @ rng.normal(size=4)
    np.testing.assert_allclose(lift(basis, project(basis, u)), u, atol=1e-10)


def test_orthogonal_vector_projects_to_zero(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(20, 5)))
    basis = PODBasis(Q[:, :4], np.ones(4), 4)
    np.testing.assert_allclose(project(basis, Q[:, 4]), 0.0, atol=1e-14)


def test_project_lift_identity(rng):
    V, _ = np.linalg.qr(rng.normal(size=(20, 4)))
    basis = PODBasis(V, np.ones(4), 4)
    x = rng.normal(size=(4, 7))
    np.testing.assert_allclose(project(basis, lift(basis, x)), x, atol=1e-12)


@given(arrays(np.float64, 20, elements=st.floats(-1e3, 1e3)))
def test_projection_norm_bound(u):
    V, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(20, 6)))
    basis = PODBasis(V, np.ones(6), 6)
    assert np.linalg.norm(project(basis, u)) <= np.linalg.norm(u) * (1 + 1e-12) + 1e-12


def test_shape_mismatch(rng):
    basis = PODBasis.identity(3)
    with pytest.raises(DimensionError):
        project(basis, np.ones(4))
    with pytest.raises(DimensionError):
        lift(basis, np.ones(2))


# --------------------------------------------------------------- scaling


def test_scaling_endpoints():
    rec = fit_scaling(np.array([[1.0, 3.0]]))
    np.testing.assert_array_equal(apply_scaling(rec, np.array([[1.0, 3.0]])), [[0.0, 1.0]])


def test_constant_row_maps_to_zero():
    X = np.array([[2.0, 2.0, 2.0], [0.0, 1.0, 2.0]])
    Y = apply_scaling(fit_scaling(X), X)
    np.testing.assert_array_equal(Y[0], 0.0)
    np.testing.assert_array_equal(Y[1], [0.0, 0.5, 1.0])


def test_training_data_maps_into_unit_interval(rng):
    X = rng.normal(size=(5, 50)) * 10
    Y = apply_scaling(fit_scaling(X), X)
    assert Y.min() >= 0.0 and Y.max() <= 1.0


def test_scaling_round_trip(rng):
    X = rng.normal(size=(4, 30))
    rec = fit_scaling(X)
    Z = rng.normal(size=(4, 9))
    np.testing.assert_allclose(invert_scaling(rec, apply_scaling(rec, Z)), Z, atol=1e-12, rtol=0)


def test_scaling_three_dimensional_input(rng):
    X = rng.normal(size=(3, 20))
    rec = fit_scaling(X)
    Z = rng.normal(size=(3, 4, 5))
    np.testing.assert_allclose(invert_scaling(rec, apply_scaling(rec, Z)), Z, atol=1e-12)


def test_disabled_scaling_is_identity(rng):
    X = rng.normal(size=(3, 10))
    rec = fit_scaling(X, enabled=False)
    assert np.array_equal(apply_scaling(rec, X), X)
    assert np.array_equal(invert_scaling(rec, X), X)


# -------------------------------------------------------------- snapshots


def test_snapshot_shape_validation():
    with pytest.raises(DimensionError):
        SnapshotMatrix(np.zeros((4, 6)), 2, 1, 2, 3)
    with pytest.raises(DimensionError):
        SnapshotMatrix(np.zeros((4, 6)), 4, 1, 2, 4)
    with pytest.raises(ValueError):
        SnapshotMatrix(np.full((2, 2), np.nan), 2, 1, 1, 2)


def test_time_window_columns(rng):
    blocks = [rng.normal(size=(3, 5)) for _ in range(2)]
    S = SnapshotMatrix.from_instances(blocks)
    W = S.time_window(1, 4)
    np.testing.assert_array_equal(W.instance(1), blocks[1][:, 1:4])
