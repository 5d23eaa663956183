"""Centroid-based partitioning of grid cells by their annual-mean series.

Lloyd iterations with squared-Euclidean distance, k-means++ seeding from a
deterministic generator, lowest-id tie-breaking, and farthest-point repair
of empty clusters.  The stopping rule is assignment stability: iterate until
the partition is identical to the one from the previous pass (an inertia
tolerance and an iteration cap are available as additional guards).

All reductions run through numpy's fixed-order single-threaded paths, so
results are bit-identical across runs and across caller thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDomainError, ParameterError
from .gridcore import PLANAR, CellIndex, GridGeometry, ZoneMap
from .ingest import AnnualMeanStack


@dataclass(frozen=True)
class FeatureMatrix:
    """One feature vector per unmasked cell (component j = year j's mean).

    ``means``/``scales`` record the standardization applied; ``scales`` stays
    1.0 for zero-variance components, which therefore standardize to zeros.
    """

    geometry: GridGeometry
    cells: tuple[CellIndex, ...]
    matrix: np.ndarray
    years: tuple[int, ...]
    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self) -> None:
        mat = np.array(self.matrix, dtype=np.float64, copy=True)
        if mat.ndim != 2 or mat.shape[0] != len(self.cells):
            raise ParameterError("matrix must be (n_cells, n_features)")
        if mat.shape[1] != len(self.years):
            raise ParameterError("one feature per year required")
        means = np.array(self.means, dtype=np.float64, copy=True)
        scales = np.array(self.scales, dtype=np.float64, copy=True)
        if means.shape != (mat.shape[1],) or scales.shape != (mat.shape[1],):
            raise ParameterError("means/scales must have one entry per feature")
        if not np.all(scales > 0):
            raise ParameterError("scales must be strictly positive")
        for arr in (mat, means, scales):
            arr.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "cells", tuple(CellIndex(*c) for c in self.cells))
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))

    @property
    def n_cells(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix) -> "FeatureMatrix":
        """Wrap a bare (n, p) or (n,) array as features on a synthetic n x 1 grid."""
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.ndim == 1:
            mat = mat.reshape(-1, 1)
        n, p = mat.shape
        geom = GridGeometry(PLANAR, 0.0, 0.0, 1.0, 1.0, n, 1)
        cells = tuple(CellIndex(i, 0) for i in range(n))
        return cls(geom, cells, mat, tuple(range(p)), np.zeros(p), np.ones(p))


@dataclass(frozen=True)
class ClusterMap:
    """Result of one k-means run: labels grid, centroids, inertia, trace."""

    geometry: GridGeometry
    labels: np.ndarray
    k: int
    centroids: np.ndarray
    inertia: float
    iterations: int
    seed: int
    inertia_history: tuple[float, ...] = ()
    converged_by: str = "stable"

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int32, copy=True)
        if labels.shape != self.geometry.shape:
            raise ParameterError("labels grid must match the geometry shape")
        present = labels[labels >= 0]
        if present.size:
            if present.max() >= self.k:
                raise ParameterError("label exceeds k")
            counts = np.bincount(present, minlength=self.k)
            if np.any(counts == 0):
                raise ParameterError("empty cluster in final result")
        cents = np.array(self.centroids, dtype=np.float64, copy=True)
        labels.setflags(write=False)
        cents.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centroids", cents)
        if self.inertia < 0:
            raise ParameterError("inertia must be non-negative")

    def zone_map(self) -> ZoneMap:
        return ZoneMap(self.geometry, self.labels, {})


def build_features(stack: AnnualMeanStack, standardize: bool = True) -> FeatureMatrix:
    """Assemble per-cell annual-mean vectors over the stack's combined mask.

    With ``standardize`` each component is z-scored across cells; a component
    with zero variance keeps scale 1 and becomes all zeros.
    """
    rows, cols = np.nonzero(stack.mask)
    if rows.size == 0:
        raise EmptyDomainError("no cell is valid in every year")
    cells = tuple(CellIndex(int(r), int(c)) for r, c in zip(rows, cols))
    mat = np.column_stack([f.values[rows, cols] for f in stack.fields])
    p = mat.shape[1]
    if standardize:
        means = mat.mean(axis=0)
        stds = mat.std(axis=0)
        scales = np.where(stds > 0, stds, 1.0)
        mat = (mat - means) / scales
    else:
        means = np.zeros(p)
        scales = np.ones(p)
    return FeatureMatrix(stack.geometry, cells, mat, stack.years, means, scales)


def _sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances with a fixed reduction order."""
    n, k = X.shape[0], centroids.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    for j in range(k):
        diff = X - centroids[j]
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each center drawn with probability proportional to
    the squared distance to the nearest already-chosen center."""
    n = X.shape[0]
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centers = [first]
    chosen[first] = True
    diff = X - X[first]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # All remaining points coincide with a center; take the first
            # unchosen index for determinism.
            idx = int(np.flatnonzero(~chosen)[0])
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers.append(idx)
        chosen[idx] = True
        diff = X - X[idx]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return X[np.array(centers)].copy()


def _labels_grid(features: FeatureMatrix, point_labels: np.ndarray) -> np.ndarray:
    grid = np.full(features.geometry.shape, -1, dtype=np.int32)
    for cell, lab in zip(features.cells, point_labels):
        grid[cell.row, cell.col] = lab
    return grid


def run_kmeans(
    features: FeatureMatrix,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 0.0,
) -> ClusterMap:
    """One deterministic Lloyd run from a k-means++ initialization.

    Assignment ties go to the lowest cluster id.  An iteration that leaves a
    cluster empty reassigns the point farthest from its own centroid to it.
    Inertia is verified non-increasing on every iteration.
    """
    X = features.matrix
    n = X.shape[0]
    if n == 0:
        raise EmptyDomainError("feature matrix has no cells")
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(X, k, rng)

    prev_labels: np.ndarray | None = None
    prev_inertia = np.inf
    history: list[float] = []
    converged_by = "max_iter"
    labels = np.zeros(n, dtype=np.int64)
    iterations = 0

    for iterations in range(1, max_iter + 1):
        dists = _sq_distances(X, centroids)
        labels = np.argmin(dists, axis=1)
        own = dists[np.arange(n), labels]
        inertia = float(own.sum())

        counts = np.bincount(labels, minlength=k)
        if np.any(counts == 0):
            own = own.copy()
            for j in np.flatnonzero(counts == 0):
                far = int(np.argmax(own))
                labels[far] = j
                own[far] = -np.inf

        if history and inertia > history[-1] * (1.0 + 1e-12) + 1e-12:
            raise AssertionError(
                f"inertia increased between iterations: {history[-1]} -> {inertia}"
            )
        history.append(inertia)

        if prev_labels is not None and np.array_equal(labels, prev_labels):
            converged_by = "stable"
            break
        if prev_labels is not None and tol > 0 and (prev_inertia - inertia) < tol:
            converged_by = "tol"
            break
        prev_labels = labels
        prev_inertia = inertia

        new_centroids = np.empty_like(centroids)
        for j in range(k):
            new_centroids[j] = X[labels == j].mean(axis=0)
        centroids = new_centroids

    final_centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    for j in range(k):
        final_centroids[j] = X[labels == j].mean(axis=0)
    dists = _sq_distances(X, final_centroids)
    inertia = float(dists[np.arange(n), labels].sum())

    return ClusterMap(
        geometry=features.geometry,
        labels=_labels_grid(features, labels),
        k=k,
        centroids=final_centroids,
        inertia=inertia,
        iterations=iterations,
        seed=seed,
        inertia_history=tuple(history),
        converged_by=converged_by,
    )


def sweep_k(
    features: FeatureMatrix,
    ks: list[int] | tuple[int, ...],
    seed: int = 0,
    restarts: int = 10,
) -> list[ClusterMap]:
    """Best-of-``restarts`` run per requested k, ordered by ascending k.

    Restart r uses derived seed ``seed + r``, so a larger restart budget can
    only improve (or match) the kept inertia for the same base seed.
    """
    if not ks:
        raise ParameterError("ks must be non-empty")
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    results = []
    for k in sorted(int(k) for k in ks):
        best: ClusterMap | None = None
        for r in range(restarts):
            run = run_kmeans(features, k, seed=seed + r)
            if best is None or run.inertia < best.inertia:
                best = run
        results.append(best)
    return results
