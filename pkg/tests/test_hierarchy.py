import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from tdreview.corpus import TD_TYPES
from tdreview.errors import DegenerateSimilarityError, KTooLargeError, SchemaMismatchError, ZeroRowError
from tdreview.hierarchy import (
    ConfusionMatrix,
    DistanceMatrix,
    SpectralTypeClustering,
    TypeHierarchy,
    distance_matrix,
    eigengap_k,
    farthest_first_kmeans,
    induce_hierarchy,
    jacobi_eigh,
    laplacian_spectrum,
    normalize_confusion,
    normalized_laplacian,
    reference_hierarchy,
    similarity,
    spectral_cluster,
)

REFERENCE_BLOCKS = [
    ["documentation", "code", "defect", "test", "design"],
    ["build", "architecture", "versioning"],
    ["usability", "requirement"],
]


def block_distance(sizes):
    """Distance whose similarity 1 - D is exactly 1 within blocks and 0 across."""
    n = sum(sizes)
    S = np.zeros((n, n))
    start = 0
    for s in sizes:
        S[start : start + s, start : start + s] = 1.0
        start += s
    return DistanceMatrix([f"l{i}" for i in range(n)], 1.0 - S)


def block_confusion(blocks, within=20, noise=0):
    labels = list(TD_TYPES)
    M = np.full((10, 10), noise, dtype=np.int64)
    for b in blocks:
        for i in b:
            for j in b:
                M[labels.index(i), labels.index(j)] = within
    return ConfusionMatrix(labels, M)


def as_sets(groups):
    return sorted(sorted(g) for g in groups)


# -- normalization and distance ---------------------------------------------


def test_normalize_identity():
    assert np.array_equal(normalize_confusion(np.diag([5, 5])), np.eye(2))


def test_normalize_hand_example():
    assert np.allclose(normalize_confusion(np.array([[8, 2], [4, 6]])), [[0.8, 0.2], [0.4, 0.6]], atol=1e-12, rtol=0)


def test_normalize_zero_row():
    with pytest.raises(ZeroRowError) as err:
        normalize_confusion(np.array([[1, 0], [0, 0]]))
    assert err.value.row == 1


def test_distance_examples():
    D = distance_matrix(np.eye(3)).values
    assert np.array_equal(D, 1 - np.eye(3))
    D = distance_matrix(np.array([[0.8, 0.2], [0.4, 0.6]])).values
    assert abs(D[0, 1] - 0.7) <= 1e-12 and abs(D[1, 0] - 0.7) <= 1e-12
    D = distance_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])).values
    assert D[0, 1] == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 10).flatmap(lambda n: st.lists(st.lists(st.integers(0, 50), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_normalize_distance_properties(rows):
    M = np.array(rows)
    M[:, 0] += 1  # keep every row sum positive
    Mb = normalize_confusion(M)
    assert np.allclose(Mb.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    D = distance_matrix(Mb).values
    assert np.abs(D - D.T).max() <= 1e-12
    assert np.all(np.diag(D) == 0)
    assert D.min() >= -1e-12 and D.max() <= 1 + 1e-12


# -- eigensolver --------------------------------------------------------------


@pytest.mark.parametrize("seed", range(20))
def test_jacobi_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(10, 10))
    A = (A + A.T) / 2
    w, V = jacobi_eigh(A)
    assert np.linalg.norm(V @ np.diag(w) @ V.T - A) < 1e-8
    assert np.allclose(V.T @ V, np.eye(10), atol=1e-10)
    assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-9)


def test_jacobi_diagonal_and_degenerate():
    w, V = jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
    assert w.tolist() == [1.0, 2.0, 3.0]
    w, _ = jacobi_eigh(np.zeros((4, 4)))
    assert w.tolist() == [0.0] * 4
    w, _ = jacobi_eigh(np.ones((3, 3)))
    assert np.allclose(w, [0, 0, 3], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_laplacian_spectrum_range(seed):
    rng = np.random.default_rng(seed)
    M = rng.integers(0, 30, size=(10, 10)) + np.eye(10, dtype=int)
    vals, _ = laplacian_spectrum(distance_matrix(normalize_confusion(M)))
    assert vals.min() >= -1e-9 and vals.max() <= 2 + 1e-9
    assert abs(vals[0]) <= 1e-9


def test_degenerate_similarity():
    with pytest.raises(DegenerateSimilarityError):
        normalized_laplacian(np.zeros((3, 3)))


# -- eigengap -----------------------------------------------------------------


def test_eigengap_three_blocks():
    assert eigengap_k(block_distance([5, 3, 2])) == 3


def test_eigengap_two_blocks():
    assert eigengap_k(block_distance([4, 3]), k_max=4) == 2


def test_eigengap_all_identical_rows_ties_to_two():
    Mb = np.full((6, 6), 1 / 6)
    assert eigengap_k(distance_matrix(Mb)) == 2


def test_eigengap_k_max_bounds():
    with pytest.raises(KTooLargeError):
        eigengap_k(block_distance([2, 2]), k_max=4)
    with pytest.raises(KTooLargeError):
        eigengap_k(block_distance([2, 2]), k_max=1)


# -- spectral clustering -----------------------------------------------------


def test_spectral_k_one_and_n():
    D = block_distance([3, 2])
    assert spectral_cluster(D, 1) == [D.labels]
    assert as_sets(spectral_cluster(D, 5)) == as_sets([[lab] for lab in D.labels])
    with pytest.raises(KTooLargeError):
        spectral_cluster(D, 6)


@pytest.mark.parametrize("seed", range(10))
def test_spectral_recovers_blocks(seed):
    D = block_distance([5, 3, 2])
    expected = [[f"l{i}" for i in range(5)], ["l5", "l6", "l7"], ["l8", "l9"]]
    assert as_sets(spectral_cluster(D, 3, seed)) == as_sets(expected)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 10), st.data())
def test_spectral_output_is_partition(seed, n, data):
    rng = np.random.default_rng(seed)
    M = rng.integers(0, 10, size=(n, n)) + np.eye(n, dtype=int)
    D = distance_matrix(normalize_confusion(M), [f"t{i}" for i in range(n)])
    k = data.draw(st.integers(1, n))
    groups = spectral_cluster(D, k, seed)
    flat = [x for g in groups for x in g]
    assert sorted(flat) == sorted(D.labels)
    assert len(groups) == k and all(groups)


def test_kmeans_reseeds_empty_cluster():
    # all points identical: assignment collapses to one center unless re-seeded
    X = np.zeros((4, 2))
    assign = farthest_first_kmeans(X, 3, seed=0)
    assert sorted(set(assign.tolist())) == [0, 1, 2]


# -- induced hierarchy --------------------------------------------------------


def test_block_confusion_yields_reference_partition():
    h = induce_hierarchy(block_confusion(REFERENCE_BLOCKS, noise=1), seed=0)
    assert h.meta["k"] == 3
    assert [sorted(ts) for ts in h.clusters.values()] == [sorted(b) for b in REFERENCE_BLOCKS]
    assert h.names == ["Cluster-1", "Cluster-2", "Cluster-3"]


def test_perfect_classifier_still_partitions():
    M = ConfusionMatrix(list(TD_TYPES), np.diag([10] * 10))
    h = induce_hierarchy(M, seed=3)
    assert h.meta["k"] == 2
    assert h.is_complete()
    assert len(h.names) == 2


def test_induce_deterministic():
    rng = np.random.default_rng(0)
    M = ConfusionMatrix(list(TD_TYPES), rng.integers(0, 20, size=(10, 10)) + 5 * np.eye(10, dtype=int))
    assert induce_hierarchy(M, seed=9).to_dict() == induce_hierarchy(M, seed=9).to_dict()


def test_cluster_naming_order():
    h = TypeHierarchy.from_partition([["usability", "requirement"], ["versioning"], ["code", "test", "design"], ["build", "architecture"]])
    assert h.clusters == {
        "Cluster-1": ["code", "design", "test"],
        "Cluster-2": ["architecture", "build"],
        "Cluster-3": ["requirement", "usability"],
        "Cluster-4": ["versioning"],
    }


def test_reference_preset():
    h = reference_hierarchy()
    assert h.is_complete()
    assert [sorted(v) for v in h.clusters.values()] == [sorted(b) for b in REFERENCE_BLOCKS]


def test_hierarchy_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        TypeHierarchy({"a": ["code"], "b": ["code"]})
    with pytest.raises(ValueError):
        TypeHierarchy({"a": []})
    h = reference_hierarchy()
    path = tmp_path / "h.json"
    h.save(path)
    assert TypeHierarchy.load(path).clusters == h.clusters
    with pytest.raises(SchemaMismatchError):
        TypeHierarchy.from_dict({"schema_version": 0, "clusters": []})


def test_spectral_estimator():
    est = SpectralTypeClustering(seed=1)
    M = block_confusion(REFERENCE_BLOCKS)
    est.fit(M.counts, labels=M.labels)
    assert est.n_clusters_ == 3
    assert est.labels_.shape == (10,)
    assert clone(est).get_params() == est.get_params()
    assert np.allclose(similarity(est.distance_), 1 - est.distance_.values + np.eye(10) * 0)
    fixed = SpectralTypeClustering(n_clusters=2).fit(M.counts, labels=M.labels)
    assert fixed.n_clusters_ == 2
