"""Class-hierarchy induction from a confusion matrix.

Counts are row-normalized, turned into a symmetric distance (0 means two
classes are always confused, 1 means never), and the classes are grouped by
spectral clustering on the similarity ``1 - D``. The number of groups comes
from the largest gap in the normalized-Laplacian spectrum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .corpus import TD_TYPES
from .errors import (
    DegenerateSimilarityError,
    KTooLargeError,
    SchemaMismatchError,
    ZeroRowError,
)

HIERARCHY_SCHEMA_VERSION = 1
TIE_TOL = 1e-9


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    labels: list[str]
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        n = len(self.labels)
        if self.counts.shape != (n, n):
            raise ValueError(f"confusion matrix must be {n}x{n}, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("confusion counts must be non-negative")

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": self.counts.tolist()}


@dataclass
class DistanceMatrix:
    labels: list[str]
    values: np.ndarray


def normalize_confusion(M: ConfusionMatrix | np.ndarray) -> np.ndarray:
    counts = np.asarray(M.counts if isinstance(M, ConfusionMatrix) else M, dtype=float)
    sums = counts.sum(axis=1)
    for i, s in enumerate(sums):
        if s <= 0:
            raise ZeroRowError(i)
    return counts / sums[:, None]


def distance_matrix(M_bar: np.ndarray, labels: Sequence[str] | None = None) -> DistanceMatrix:
    M_bar = np.asarray(M_bar, dtype=float)
    D = 1.0 - (M_bar + M_bar.T) / 2.0
    np.fill_diagonal(D, 0.0)
    labels = list(labels) if labels is not None else [str(i) for i in range(len(D))]
    return DistanceMatrix(labels, D)


def similarity(D: DistanceMatrix | np.ndarray) -> np.ndarray:
    D = D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    S = 1.0 - D
    np.fill_diagonal(S, 1.0)
    return S


def normalized_laplacian(S: np.ndarray) -> np.ndarray:
    """I - Deg^-1/2 S Deg^-1/2 for a symmetric non-negative similarity."""
    deg = S.sum(axis=1)
    if np.any(deg <= 0):
        raise DegenerateSimilarityError("a class has zero total similarity")
    inv = 1.0 / np.sqrt(deg)
    return np.eye(len(S)) - inv[:, None] * S * inv[None, :]


def jacobi_eigh(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors as
    columns. Rotation angles use the numerically stable tangent formula.
    """
    A = np.array(A, dtype=float)
    n = len(A)
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def laplacian_spectrum(D: DistanceMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return jacobi_eigh(normalized_laplacian(similarity(D)))


def eigengap_k(D: DistanceMatrix | np.ndarray, k_max: int | None = None) -> int:
    """Cluster count in [2, k_max] with the largest gap lambda_{k+1} - lambda_k.

    Gaps within ``TIE_TOL`` of the maximum count as ties; the smaller k wins.
    """
    vals, _ = laplacian_spectrum(D)
    n = len(vals)
    k_max = n - 1 if k_max is None else k_max
    if not 2 <= k_max <= n - 1:
        raise KTooLargeError(f"k_max must be within [2, {n - 1}], got {k_max}")
    gaps = [vals[k] - vals[k - 1] for k in range(2, k_max + 1)]
    best = max(gaps)
    return next(k for k, g in zip(range(2, k_max + 1), gaps) if g >= best - TIE_TOL)


def farthest_first_kmeans(
    X: np.ndarray, k: int, seed: int = 0, max_iter: int = 100, max_reseeds: int = 10
) -> np.ndarray:
    """k-means with farthest-first initialization from a seeded start row.

    Stops when assignments no longer change. An emptied cluster is re-seeded
    at the point farthest from its assigned center.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    rng = np.random.default_rng(seed)
    centers = [int(rng.integers(n))]
    d2 = np.sum((X - X[centers[0]]) ** 2, axis=1)
    while len(centers) < k:
        d2m = d2.copy()
        d2m[centers] = -1.0
        nxt = int(np.argmax(d2m))
        centers.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    C = X[centers].copy()

    assign = np.full(n, -1)
    reseeds = 0
    for _ in range(max_iter):
        dist = np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)
        new = np.argmin(dist, axis=1)
        empty = [j for j in range(k) if not np.any(new == j)]
        if empty and reseeds < max_reseeds:
            reseeds += 1
            own = dist[np.arange(n), new]
            taken: set[int] = set()
            for j in empty:
                order = np.argsort(-own, kind="stable")
                donors = np.bincount(new, minlength=k)
                pick = next(int(i) for i in order if int(i) not in taken and donors[new[i]] > 1)
                taken.add(pick)
                new[pick] = j
                C[j] = X[pick]
        if np.array_equal(new, assign):
            break
        assign = new
        for j in range(k):
            members = X[assign == j]
            if len(members):
                C[j] = members.mean(axis=0)
    return assign


def spectral_embedding(D: DistanceMatrix | np.ndarray, k: int) -> np.ndarray:
    """Rows of the bottom-k Laplacian eigenvectors, each scaled to unit length."""
    _, vecs = laplacian_spectrum(D)
    U = vecs[:, :k].copy()
    norms = np.linalg.norm(U, axis=1)
    nz = norms > 1e-12
    U[nz] /= norms[nz, None]
    return U


def spectral_cluster(D: DistanceMatrix | np.ndarray, k: int, seed: int = 0) -> list[list[str]]:
    labels = D.labels if isinstance(D, DistanceMatrix) else [str(i) for i in range(len(D))]
    n = len(labels)
    if k > n:
        raise KTooLargeError(f"k={k} exceeds {n} labels")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return [list(labels)]
    assign = farthest_first_kmeans(spectral_embedding(D, k), k, seed)
    return [[labels[i] for i in range(n) if assign[i] == j] for j in range(k) if np.any(assign == j)]


# ---------------------------------------------------------------------------
# hierarchy record


@dataclass
class TypeHierarchy:
    """Two-level hierarchy: named clusters, each a list of leaf types."""

    clusters: dict[str, list[str]]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.clusters:
            raise ValueError("hierarchy needs at least one cluster")
        seen: set[str] = set()
        for name, types in self.clusters.items():
            if not types:
                raise ValueError(f"cluster {name!r} is empty")
            dup = seen.intersection(types)
            if dup or len(set(types)) != len(types):
                raise ValueError(f"types assigned twice: {sorted(dup) or types}")
            seen.update(types)

    @property
    def names(self) -> list[str]:
        return list(self.clusters)

    @property
    def types(self) -> list[str]:
        return [t for ts in self.clusters.values() for t in ts]

    def cluster_of(self, td_type: str) -> str:
        for name, types in self.clusters.items():
            if td_type in types:
                return name
        raise KeyError(td_type)

    def is_complete(self) -> bool:
        return sorted(self.types) == sorted(TD_TYPES)

    def to_dict(self) -> dict:
        return {
            "schema_version": HIERARCHY_SCHEMA_VERSION,
            "clusters": [{"name": n, "types": list(ts)} for n, ts in self.clusters.items()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TypeHierarchy":
        if d.get("schema_version") != HIERARCHY_SCHEMA_VERSION:
            raise SchemaMismatchError(f"hierarchy schema_version {d.get('schema_version')!r}")
        return cls({c["name"]: list(c["types"]) for c in d["clusters"]})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TypeHierarchy":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def from_partition(cls, groups: Sequence[Sequence[str]], order: Sequence[str] | None = None) -> "TypeHierarchy":
        """Name groups Cluster-1..K by (size desc, alphabetically first member)."""
        rank = {t: i for i, t in enumerate(order or TD_TYPES)}
        groups = [sorted(g, key=lambda t: (rank.get(t, len(rank)), t)) for g in groups]
        groups.sort(key=lambda g: (-len(g), min(g)))
        return cls({f"Cluster-{i}": list(g) for i, g in enumerate(groups, 1)})


def reference_hierarchy() -> TypeHierarchy:
    """The three-cluster TD hierarchy shipped as a preset."""
    text = resources.files("tdreview.presets").joinpath("reference_hierarchy.json").read_text(encoding="utf-8")
    return TypeHierarchy.from_dict(json.loads(text))


def induce_hierarchy(M: ConfusionMatrix, k_max: int | None = None, seed: int = 0) -> TypeHierarchy:
    D = distance_matrix(normalize_confusion(M), M.labels)
    n = len(M.labels)
    if n <= 2:
        groups = [[lab] for lab in M.labels]
        k = n
    else:
        k = eigengap_k(D, min(k_max or n - 1, n - 1))
        groups = spectral_cluster(D, k, seed)
    h = TypeHierarchy.from_partition(groups, M.labels)
    h.meta = {"k": k, "seed": seed}
    return h


class SpectralTypeClustering(ClusterMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` takes a square confusion-count matrix.

    ``n_clusters=None`` selects K by the eigengap heuristic up to ``k_max``.
    """

    def __init__(self, n_clusters: int | None = None, k_max: int | None = None, seed: int = 0):
        self.n_clusters = n_clusters
        self.k_max = k_max
        self.seed = seed

    def fit(self, X, y=None, labels: Sequence[str] | None = None):
        counts = np.asarray(X)
        labels = list(labels) if labels is not None else [str(i) for i in range(len(counts))]
        M = ConfusionMatrix(labels, counts)
        self.normalized_ = normalize_confusion(M)
        self.distance_ = distance_matrix(self.normalized_, labels)
        self.eigenvalues_, _ = laplacian_spectrum(self.distance_)
        n = len(labels)
        k = self.n_clusters or eigengap_k(self.distance_, min(self.k_max or n - 1, n - 1))
        groups = spectral_cluster(self.distance_, k, self.seed)
        self.n_clusters_ = len(groups)
        pos = {lab: i for i, lab in enumerate(labels)}
        self.labels_ = np.empty(n, dtype=np.int64)
        for j, g in enumerate(groups):
            for lab in g:
                self.labels_[pos[lab]] = j
        self.hierarchy_ = TypeHierarchy.from_partition(groups, labels)
        return self
