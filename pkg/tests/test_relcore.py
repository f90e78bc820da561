import numpy as np
import pytest

from relkit import numcore as nc
from relkit import relcore as rc


def untied_pair(rng, d, d_k):
    return rc.ProjectionPair(
        w_phi=nc.tensor(rng.normal(size=(d, d_k))),
        w_psi=nc.tensor(rng.normal(size=(d, d_k))),
        tied=False,
    )


def tied_identity_pair(d):
    eye = nc.tensor(np.eye(d))
    return rc.ProjectionPair(w_phi=eye, w_psi=eye, tied=True)


# ---------------------------------------------------------------------------
# project


def test_project_identity_tied_returns_embeddings():
    rng = np.random.default_rng(0)
    emb = nc.tensor(rng.normal(size=(4, 6)))
    q, k = rc.project(emb, tied_identity_pair(6))
    assert np.array_equal(q.data, emb.data)
    assert np.array_equal(k.data, emb.data)


def test_project_zero_projection():
    emb = nc.tensor(np.random.default_rng(1).normal(size=(3, 5)))
    zero = nc.tensor(np.zeros((5, 2)))
    q, k = rc.project(emb, rc.ProjectionPair(w_phi=zero, w_psi=zero, tied=True))
    assert np.array_equal(q.data, np.zeros((3, 2)))
    assert np.array_equal(k.data, np.zeros((3, 2)))


def test_project_row_oracle():
    rng = np.random.default_rng(2)
    emb = rng.normal(size=(5, 7))
    pair = untied_pair(rng, 7, 3)
    q, k = rc.project(nc.tensor(emb), pair)
    for i in range(5):
        want_q = np.array([emb[i] @ pair.w_phi.data[:, j] for j in range(3)])
        want_k = np.array([emb[i] @ pair.w_psi.data[:, j] for j in range(3)])
        assert np.max(np.abs(q.data[i] - want_q)) < 1e-12
        assert np.max(np.abs(k.data[i] - want_k)) < 1e-12


def test_project_dimension_mismatch():
    emb = nc.tensor(np.zeros((2, 4)))
    with pytest.raises(nc.ShapeError):
        rc.project(emb, tied_identity_pair(5))


def test_tied_pair_must_share_object():
    eye = np.eye(3)
    with pytest.raises(nc.ParameterError):
        rc.ProjectionPair(w_phi=nc.tensor(eye), w_psi=nc.tensor(eye), tied=True)


# ---------------------------------------------------------------------------
# relation_matrix


def test_relation_matrix_identical_unit_rows():
    row = np.ones(4) / 2.0  # unit norm
    emb = nc.tensor(np.tile(row, (3, 1)))
    q, k = rc.project(emb, tied_identity_pair(4))
    r = rc.relation_matrix(q, k, scale=1.0)
    assert np.max(np.abs(r.data - np.ones((3, 3)))) < 1e-12


def test_relation_matrix_orthonormal_rows():
    emb = nc.tensor(np.eye(4)[:3])
    q, k = rc.project(emb, tied_identity_pair(4))
    r = rc.relation_matrix(q, k, scale=1.0)
    assert np.max(np.abs(r.data - np.eye(3))) < 1e-12


def test_relation_matrix_loop_oracle():
    rng = np.random.default_rng(3)
    q = rng.normal(size=(4, 5))
    k = rng.normal(size=(4, 5))
    scale = 1.0 / np.sqrt(5.0)
    r = rc.relation_matrix(nc.tensor(q), nc.tensor(k), scale)
    for i in range(4):
        for j in range(4):
            want = scale * sum(q[i, t] * k[j, t] for t in range(5))
            assert abs(r.data[i, j] - want) < 1e-12


def test_relation_matrix_scale_validation():
    q = nc.tensor(np.zeros((2, 2)))
    with pytest.raises(nc.ParameterError):
        rc.relation_matrix(q, q, scale=0.0)


def test_tied_projection_symmetry():
    rng = np.random.default_rng(4)
    emb = nc.tensor(rng.normal(size=(5, 8)))
    w = nc.tensor(rng.normal(size=(8, 4)))
    pair = rc.ProjectionPair(w_phi=w, w_psi=w, tied=True)
    q, k = rc.project(emb, pair)
    r = rc.relation_matrix(q, k, scale=0.5).data
    assert np.max(np.abs(r - r.T)) < 1e-12


def test_untied_projection_generic_asymmetry():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        emb = nc.tensor(rng.normal(size=(5, 8)))
        q, k = rc.project(emb, untied_pair(rng, 8, 4))
        r = rc.relation_matrix(q, k, scale=1.0).data
        if np.max(np.abs(r - r.T)) > 1e-3:
            hits += 1
    assert hits >= 9


# ---------------------------------------------------------------------------
# attend_symbols


def test_attend_single_object_returns_first_symbol():
    rng = np.random.default_rng(5)
    lib = rc.SymbolLibrary(values=nc.tensor(rng.normal(size=(4, 6))))
    r = nc.tensor([[2.5]])
    out = rc.attend_symbols(r, lib)
    assert np.max(np.abs(out.data - lib.values.data[0])) < 1e-15


def test_attend_equal_rows_average_symbols():
    rng = np.random.default_rng(6)
    lib = rc.SymbolLibrary(values=nc.tensor(rng.normal(size=(5, 3))))
    r = nc.tensor(np.full((3, 3), 0.7))
    out = rc.attend_symbols(r, lib)
    avg = lib.values.data[:3].mean(axis=0)
    for i in range(3):
        assert np.max(np.abs(out.data[i] - avg)) < 1e-12


def test_attend_two_path_oracle():
    rng = np.random.default_rng(7)
    lib = rc.SymbolLibrary(values=nc.tensor(rng.normal(size=(6, 4))))
    r = rng.normal(size=(4, 4))
    out = rc.attend_symbols(nc.tensor(r), lib, temperature=0.8).data
    # independent path: explicit softmax then weighted sum
    e = np.exp((r / 0.8) - (r / 0.8).max(axis=1, keepdims=True))
    w = e / e.sum(axis=1, keepdims=True)
    want = w @ lib.values.data[:4]
    assert np.max(np.abs(out - want)) < 1e-12


def test_attend_capacity_error():
    lib = rc.SymbolLibrary(values=nc.tensor(np.zeros((2, 3))))
    with pytest.raises(rc.CapacityError):
        rc.attend_symbols(nc.tensor(np.zeros((3, 3))), lib)


def test_bottleneck_isolation_same_matrix_same_output():
    # two embedding sets that happen to produce one relation matrix object
    rng = np.random.default_rng(8)
    lib = rc.SymbolLibrary(values=nc.tensor(rng.normal(size=(5, 4))))
    emb_a = rng.normal(size=(3, 6))
    q_rot = rc.random_orthogonal(6, seed=1)
    emb_b = emb_a @ q_rot  # different content, identical inner products
    r_a = rc.relation_matrix(nc.tensor(emb_a), nc.tensor(emb_a), 1.0)
    out_a = rc.attend_symbols(r_a, lib).data
    out_again = rc.attend_symbols(r_a, lib).data
    assert out_a.tobytes() == out_again.tobytes()
    r_b = rc.relation_matrix(nc.tensor(emb_b), nc.tensor(emb_b), 1.0)
    out_b = rc.attend_symbols(r_b, lib).data
    assert np.max(np.abs(out_b - out_a)) < 1e-12


# ---------------------------------------------------------------------------
# random_orthogonal


def test_random_orthogonal_dim_one():
    q = rc.random_orthogonal(1, seed=0)
    assert q.shape == (1, 1)
    assert abs(abs(q[0, 0]) - 1.0) < 1e-12


def test_random_orthogonal_is_orthogonal():
    q = rc.random_orthogonal(16, seed=9)
    assert np.max(np.abs(q.T @ q - np.eye(16))) < 1e-10


def test_random_orthogonal_deterministic():
    a = rc.random_orthogonal(8, seed=42)
    b = rc.random_orthogonal(8, seed=42)
    assert a.tobytes() == b.tobytes()


def test_probe_rejects_non_orthogonal():
    class Stub:
        rotation_dim = 3

        def output(self, episode, rotation=None):
            return np.zeros(2)

    with pytest.raises(nc.ParameterError):
        rc.isolation_probe(Stub(), np.zeros((2, 3)), orthogonal_q=np.ones((3, 3)))


def test_probe_identity_rotation_zero_deviation():
    class Stub:
        rotation_dim = 4

        def output(self, episode, rotation=None):
            e = episode if rotation is None else episode @ rotation
            return e @ e.T  # depends only on inner products

    dev = rc.isolation_probe(Stub(), np.random.default_rng(0).normal(size=(3, 4)),
                             orthogonal_q=np.eye(4))
    assert dev == 0.0


def test_l2_normalize_rows():
    rng = np.random.default_rng(10)
    x = rc.l2_normalize_rows(nc.tensor(rng.normal(size=(4, 5)))).data
    assert np.max(np.abs(np.linalg.norm(x, axis=1) - 1.0)) < 1e-9


def test_pairwise_cosine_mean_identical_vectors():
    v = np.array([1.0, 2.0, 3.0])
    assert abs(rc.pairwise_cosine_mean([v, v.copy(), v.copy()]) - 1.0) < 1e-12
