"""Seeded k-means (with the staged cascade scheme) and agglomerative
hierarchical clustering."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .vectors import DefinitionVector

logger = logging.getLogger(__name__)


@dataclass
class ClusterAssignment:
    k: int
    labels: dict[str, int]
    centroids: np.ndarray
    inertia: float
    seed: int
    iterations_run: int
    inertia_history: list[float] = field(default_factory=list)


def _stack_sorted(vectors: list[DefinitionVector]) -> tuple[list[str], np.ndarray]:
    """Sort by candidate id so seeding is independent of input order."""
    if any(v.degenerate for v in vectors):
        bad = [v.candidate_id for v in vectors if v.degenerate]
        raise DataError(f"degenerate (zero) vectors cannot be clustered: {bad[:5]}")
    order = sorted(range(len(vectors)), key=lambda i: vectors[i].candidate_id)
    ids = [vectors[i].candidate_id for i in order]
    X = np.stack([vectors[i].values for i in order])
    return ids, X


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d2 = (
        (X * X).sum(axis=1)[:, None]
        - 2.0 * (X @ C.T)
        + (C * C).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[chosen[-1]][None, :])[:, 0]
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass at distance zero: fill with unchosen indices
            for i in range(n):
                if i not in chosen:
                    chosen.append(i)
                    if len(chosen) == k:
                        break
            break
        idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dists(X, X[idx][None, :])[:, 0])
    return X[chosen].copy()


def kmeans(
    vectors: list[DefinitionVector],
    k: int,
    seed: int = 42,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterAssignment:
    """Lloyd iterations from a seeded k-means++ start.

    Assignment ties break to the lowest cluster index; empty clusters are
    reseeded from the farthest point. Per-iteration inertia is recorded
    and checked to be non-increasing.
    """
    if k <= 0:
        raise DataError(f"k must be positive, got {k}")
    if not vectors:
        raise DataError("no vectors to cluster")
    if k > len(vectors):
        raise DataError(f"k={k} exceeds the number of vectors ({len(vectors)})")
    ids, X = _stack_sorted(vectors)
    rng = np.random.default_rng(seed)
    C = _kmeanspp_init(X, k, rng)

    history: list[float] = []
    labels = np.zeros(len(ids), dtype=int)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _sq_dists(X, C)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(len(ids)), labels].sum())
        if history and inertia > history[-1] * (1.0 + 1e-9) + 1e-12:
            raise AssertionError(
                f"inertia increased across Lloyd iterations: {history[-1]} -> {inertia}"
            )
        history.append(inertia)

        new_C = C.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_C[c] = X[members].mean(axis=0)
        empties = [c for c in range(k) if not (labels == c).any()]
        if empties:
            own = d2[np.arange(len(ids)), labels]
            order = np.argsort(-own, kind="stable")
            for slot, c in enumerate(empties):
                new_C[c] = X[order[slot]]
        shift = float(np.sqrt(((new_C - C) ** 2).sum(axis=1)).max())
        C = new_C
        if shift < tol:
            break

    d2 = _sq_dists(X, C)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(ids)), labels].sum())
    if inertia < history[-1]:
        history.append(inertia)
    return ClusterAssignment(
        k=k,
        labels={cid: int(lbl) for cid, lbl in zip(ids, labels)},
        centroids=C,
        inertia=inertia,
        seed=seed,
        iterations_run=iterations,
        inertia_history=history,
    )


def scale_ks(ks: tuple[int, ...], n: int, reference: int | None = None) -> tuple[int, ...]:
    """Shrink stage sizes as ceil(k*n/reference) when the corpus is
    smaller than the reference scale (twice the largest stage), keeping
    the stage ratios. Degenerate trailing stages are dropped."""
    ref = reference if reference is not None else 2 * max(ks)
    if n >= ref:
        return tuple(ks)
    scaled: list[int] = []
    for k in ks:
        v = min(n, max(1, math.ceil(k * n / ref)))
        if scaled and v >= scaled[-1]:
            continue
        scaled.append(v)
    return tuple(scaled)


def cascade_cluster(
    vectors: list[DefinitionVector],
    ks: list[int] | tuple[int, ...],
    seed: int = 42,
    max_iter: int = 300,
    tol: float = 1e-6,
    restage: str = "centroids",
) -> list[ClusterAssignment]:
    """Staged clustering at strictly decreasing k.

    With restage="centroids" (default) each stage clusters the previous
    stage's centroids; with restage="raw" each stage re-clusters the
    original vectors. Every returned assignment maps the original
    candidate ids, and its inertia is recomputed over the original
    vectors against that stage's centroids.
    """
    ks = tuple(int(k) for k in ks)
    if not ks:
        raise DataError("ks must be non-empty")
    if any(b >= a for a, b in zip(ks, ks[1:])):
        raise DataError(f"ks must be strictly decreasing, got {list(ks)}")
    if max(ks) > len(vectors):
        raise DataError(f"max(ks)={max(ks)} exceeds the number of vectors ({len(vectors)})")
    if restage not in ("centroids", "raw"):
        raise DataError(f"unknown restage mode {restage!r}")

    ids, X = _stack_sorted(vectors)
    stages: list[ClusterAssignment] = []
    prev: ClusterAssignment | None = None
    for stage_idx, k in enumerate(ks):
        stage_seed = seed + stage_idx
        if stage_idx == 0 or restage == "raw":
            assign = kmeans(vectors, k, seed=stage_seed, max_iter=max_iter, tol=tol)
            composed = assign.labels
            centroids = assign.centroids
        else:
            width = len(str(prev.k))
            points = [
                DefinitionVector(candidate_id=f"s{stage_idx - 1}c{i:0{width}d}", values=c)
                for i, c in enumerate(prev.centroids)
            ]
            sub = kmeans(points, k, seed=stage_seed, max_iter=max_iter, tol=tol)
            relabel = {i: sub.labels[p.candidate_id] for i, p in enumerate(points)}
            composed = {cid: relabel[prev.labels[cid]] for cid in prev.labels}
            centroids = sub.centroids
            assign = sub
        lab = np.array([composed[cid] for cid in ids], dtype=int)
        d2 = _sq_dists(X, centroids)
        inertia = float(d2[np.arange(len(ids)), lab].sum())
        stage = ClusterAssignment(
            k=k,
            labels=dict(composed),
            centroids=centroids,
            inertia=inertia,
            seed=stage_seed,
            iterations_run=assign.iterations_run,
            inertia_history=list(assign.inertia_history),
        )
        stages.append(stage)
        prev = stage
    return stages


@dataclass(frozen=True)
class LinkageTree:
    """Agglomerative merge sequence: (left, right, distance, size) per
    merge, nodes numbered leaves first then merges."""

    merges: tuple[tuple[int, int, float, int], ...]
    n_leaves: int
    leaf_labels: tuple[str, ...] = ()


def agglomerate(dissimilarity: np.ndarray, linkage: str = "average",
                leaf_labels: tuple[str, ...] = ()) -> LinkageTree:
    """Standard agglomerative clustering over a square dissimilarity
    matrix; ties break on the smallest pair of cluster representatives
    (each cluster represented by its smallest leaf index)."""
    D = np.asarray(dissimilarity, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DataError(f"dissimilarity must be square, got shape {D.shape}")
    if (D < 0).any():
        raise DataError("dissimilarity matrix has negative entries")
    if not np.allclose(D, D.T, atol=1e-9):
        raise DataError("dissimilarity matrix is not symmetric")
    if not np.allclose(np.diag(D), 0.0, atol=1e-9):
        raise DataError("dissimilarity matrix has a nonzero diagonal")
    if linkage not in ("average", "complete", "single"):
        raise DataError(f"unknown linkage {linkage!r}")
    n = D.shape[0]
    if n == 0:
        raise DataError("empty dissimilarity matrix")

    work = D.copy()
    # node id and size per active cluster; representative = smallest leaf
    active: dict[int, tuple[int, int, int]] = {i: (i, 1, i) for i in range(n)}
    merges: list[tuple[int, int, float, int]] = []
    next_node = n
    rows = list(range(n))
    for _ in range(n - 1):
        best = None
        for ai in range(len(rows)):
            for bi in range(ai + 1, len(rows)):
                i, j = rows[ai], rows[bi]
                d = work[i, j]
                ri, rj = active[i][2], active[j][2]
                key = (d, min(ri, rj), max(ri, rj))
                if best is None or key < best[0]:
                    best = (key, i, j)
        _, i, j = best
        node_i, size_i, rep_i = active[i]
        node_j, size_j, rep_j = active[j]
        d = float(work[i, j])
        size = size_i + size_j
        left, right = sorted((node_i, node_j))
        merges.append((left, right, d, size))
        # Lance-Williams update into row i
        for other in rows:
            if other in (i, j):
                continue
            if linkage == "average":
                nd = (size_i * work[i, other] + size_j * work[j, other]) / size
            elif linkage == "complete":
                nd = max(work[i, other], work[j, other])
            else:
                nd = min(work[i, other], work[j, other])
            work[i, other] = work[other, i] = nd
        active[i] = (next_node, size, min(rep_i, rep_j))
        del active[j]
        rows.remove(j)
        next_node += 1
    return LinkageTree(merges=tuple(merges), n_leaves=n, leaf_labels=tuple(leaf_labels))


def cut_tree(tree: LinkageTree, groups: int) -> list[list[int]]:
    """Partition the leaves by discarding the groups-1 highest merges.

    Returns lists of leaf indices, each sorted, ordered by smallest
    member.
    """
    n = tree.n_leaves
    if not (1 <= groups <= n):
        raise DataError(f"groups must be in [1, {n}], got {groups}")
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    node_root: dict[int, int] = {i: i for i in range(n)}
    for idx, (left, right, _, _) in enumerate(tree.merges[: n - groups]):
        a, b = find(node_root[left]), find(node_root[right])
        parent[b] = a
        members[a].extend(members.pop(b))
        node_root[n + idx] = a
    groups_out = [sorted(v) for v in members.values()]
    groups_out.sort(key=lambda g: g[0])
    return groups_out


def mean_silhouette(X: np.ndarray, labels: np.ndarray) -> float | None:
    """Mean silhouette coefficient; None when undefined (k < 2 or any
    singleton-only configuration)."""
    n = len(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2 or len(uniq) >= n:
        return None
    d = np.sqrt(_sq_dists(X, X))
    scores = []
    for i in range(n):
        same = labels == labels[i]
        same[i] = False
        if not same.any():
            scores.append(0.0)
            continue
        a = d[i, same].mean()
        b = min(d[i, labels == c].mean() for c in uniq if c != labels[i])
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    return float(np.mean(scores))
