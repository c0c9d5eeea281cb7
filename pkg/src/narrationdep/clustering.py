"""Semantic clustering of per-tweet embeddings.

Two clusterers behind a scikit-learn estimator API: a density-based
hierarchical clusterer (core distances -> mutual reachability -> minimum
spanning tree -> single-linkage hierarchy -> condensed tree -> flat clusters
by maximum stability) and Lloyd's k-means with k-means++ seeding and
restarts. Noise points are never dropped: after extraction they are routed
into one shared residual cluster per user, and cluster ids are renumbered
by each cluster's earliest tweet so downstream sequence models see a
deterministic order.
"""

from __future__ import annotations

import json
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_array

from .data import Dataset, UserRecord
from .errors import ConfigurationError, ConsistencyError, DataError
from .numerics import DTYPE, rng_stream

E_MAX_DEFAULT = 30

METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class HdbscanParams:
    """Density-clustering knobs; min_samples may not exceed min_cluster_size."""

    min_cluster_size: int = 3
    min_samples: int = 1
    metric: str = "euclidean"

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ConfigurationError(
                f"min_cluster_size must be >= 2, got {self.min_cluster_size}")
        if not 1 <= self.min_samples <= self.min_cluster_size:
            raise ConfigurationError(
                f"min_samples must be in [1, min_cluster_size], got {self.min_samples}")
        if self.metric not in METRICS:
            raise ConfigurationError(f"unknown metric {self.metric!r}")

    def to_dict(self) -> dict:
        return {
            "min_cluster_size": self.min_cluster_size,
            "min_samples": self.min_samples,
            "metric": self.metric,
        }


@dataclass
class ClusterAssignment:
    """Final per-tweet cluster ids in 0..n_clusters-1 (residual included)."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.n_clusters):
            raise ConsistencyError(
                f"labels must lie in 0..{self.n_clusters - 1}")

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)


def sentence_embed(user: UserRecord) -> np.ndarray:
    """Per-tweet sentence vectors: the mean of each tweet's token vectors."""
    if not user.tweets:
        raise ConsistencyError(f"user {user.user_id!r} has no tweets")
    return np.stack([t.tokens.mean(axis=0) for t in user.tweets]).astype(DTYPE)


def pairwise_distances(points: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """Dense symmetric distance matrix with an exactly-zero diagonal."""
    points = np.asarray(points, dtype=DTYPE)
    if metric == "euclidean":
        sq = np.sum(points ** 2, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
        np.maximum(d2, 0.0, out=d2)
        dist = np.sqrt(d2)
    elif metric == "cosine":
        norms = np.linalg.norm(points, axis=1)
        safe = np.where(norms == 0.0, 1.0, norms)
        unit = points / safe[:, None]
        sim = unit @ unit.T
        # zero vectors are dissimilar to everything except other zero vectors
        zero = norms == 0.0
        sim[zero, :] = 0.0
        sim[:, zero] = 0.0
        sim[np.ix_(zero, zero)] = 1.0
        dist = 1.0 - np.clip(sim, -1.0, 1.0)
    else:
        raise ConfigurationError(f"unknown metric {metric!r}")
    np.fill_diagonal(dist, 0.0)
    return dist


def core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest neighbour.

    Neighbour ranks count the point itself at rank zero, so min_samples=1
    gives the distance to the closest other point. min_samples is capped at
    n-1 for tiny inputs.
    """
    n = dist.shape[0]
    k = min(min_samples, n - 1)
    return np.sort(dist, axis=1)[:, k]


def mutual_reachability(dist: np.ndarray, core: np.ndarray) -> np.ndarray:
    """max(core(a), core(b), d(a, b)), the density-aware distance."""
    mr = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def prim_mst(weights: np.ndarray) -> np.ndarray:
    """Minimum spanning tree of a dense symmetric graph, O(n^2).

    Returns (n-1, 3) rows [a, b, weight] in the order edges are grown from
    vertex 0; ties broken by lowest vertex index.
    """
    n = weights.shape[0]
    if n < 2:
        return np.zeros((0, 3), dtype=DTYPE)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    best_from = np.zeros(n, dtype=int)
    edges = np.empty((n - 1, 3), dtype=DTYPE)
    for step in range(n - 1):
        candidate = np.where(in_tree, np.inf, best)
        j = int(np.argmin(candidate))
        edges[step] = (best_from[j], j, best[j])
        in_tree[j] = True
        closer = weights[j] < best
        best_from = np.where(closer, j, best_from)
        best = np.where(closer, weights[j], best)
    return edges


def single_linkage_tree(mst_edges: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merge the MST edges in ascending weight order into a dendrogram.

    Returns (children, heights, sizes): merge i creates node n+i joining
    the two child node ids at the given height.
    """
    order = np.lexsort((mst_edges[:, 1], mst_edges[:, 0], mst_edges[:, 2]))
    edges = mst_edges[order]
    parent = list(range(n))
    node_of = list(range(n))
    size = [1] * n
    children = np.empty((n - 1, 2), dtype=int)
    heights = np.empty(n - 1, dtype=DTYPE)
    sizes = np.empty(n - 1, dtype=int)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n - 1):
        a, b, dist = int(edges[i, 0]), int(edges[i, 1]), edges[i, 2]
        ra, rb = find(a), find(b)
        children[i] = (node_of[ra], node_of[rb])
        heights[i] = dist
        sizes[i] = size[ra] + size[rb]
        parent[rb] = ra
        node_of[ra] = n + i
        size[ra] = sizes[i]
    return children, heights, sizes


@dataclass
class CondensedTree:
    """Flattened condensed hierarchy.

    Each row (parent, child, lam, size) says that ``child`` (a point when
    id < n, otherwise a condensed cluster) separates from cluster ``parent``
    at density level ``lam`` = 1/distance. The root cluster has id n.
    """

    parent: np.ndarray
    child: np.ndarray
    lam: np.ndarray
    size: np.ndarray
    n_points: int

    def cluster_ids(self) -> np.ndarray:
        ids = set(self.parent.tolist())
        ids.update(c for c in self.child.tolist() if c >= self.n_points)
        return np.array(sorted(ids), dtype=int)


def condense_tree(children: np.ndarray, heights: np.ndarray, n: int,
                  min_cluster_size: int) -> CondensedTree:
    """Prune the dendrogram: subtrees below min_cluster_size fall out as
    points, and a cluster id persists until a split into two large parts."""
    if n == 1:
        return CondensedTree(parent=np.array([], dtype=int), child=np.array([], dtype=int),
                             lam=np.array([], dtype=DTYPE), size=np.array([], dtype=int),
                             n_points=1)
    root = 2 * n - 2

    def node_size(node: int) -> int:
        return 1 if node < n else int(children.shape[0] and _sizes[node - n])

    _sizes = np.empty(n - 1, dtype=int)
    for i in range(n - 1):
        left, right = children[i]
        _sizes[i] = (1 if left < n else _sizes[left - n]) + (1 if right < n else _sizes[right - n])

    def leaves_under(node: int) -> List[int]:
        out, stack = [], [node]
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                stack.extend(children[cur - n])
        return out

    rows_parent: List[int] = []
    rows_child: List[int] = []
    rows_lam: List[float] = []
    rows_size: List[int] = []
    relabel = {root: n}
    next_label = n + 1
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node < n:
            continue
        cluster = relabel[node]
        left, right = int(children[node - n][0]), int(children[node - n][1])
        dist = float(heights[node - n])
        lam = np.inf if dist == 0.0 else 1.0 / dist
        left_size, right_size = node_size(left), node_size(right)
        big_left = left_size >= min_cluster_size
        big_right = right_size >= min_cluster_size
        if big_left and big_right:
            for side, side_size in ((left, left_size), (right, right_size)):
                rows_parent.append(cluster)
                rows_child.append(next_label)
                rows_lam.append(lam)
                rows_size.append(side_size)
                relabel[side] = next_label
                next_label += 1
                queue.append(side)
        elif not big_left and not big_right:
            for p in leaves_under(left) + leaves_under(right):
                rows_parent.append(cluster)
                rows_child.append(p)
                rows_lam.append(lam)
                rows_size.append(1)
        else:
            keep, drop = (left, right) if big_left else (right, left)
            for p in leaves_under(drop):
                rows_parent.append(cluster)
                rows_child.append(p)
                rows_lam.append(lam)
                rows_size.append(1)
            relabel[keep] = cluster
            queue.append(keep)
    return CondensedTree(parent=np.array(rows_parent, dtype=int),
                         child=np.array(rows_child, dtype=int),
                         lam=np.array(rows_lam, dtype=DTYPE),
                         size=np.array(rows_size, dtype=int),
                         n_points=n)


def cluster_stabilities(tree: CondensedTree) -> Dict[int, float]:
    """Persistence of each condensed cluster: sum over its direct rows of
    (lam - birth_lam) * size, with the root born at density zero.

    A cluster born at infinite density (a subtree of duplicate points) gets
    zero persistence so selection collapses it into its parent.
    """
    births: Dict[int, float] = {tree.n_points: 0.0}
    for parent, child, lam in zip(tree.parent, tree.child, tree.lam):
        if child >= tree.n_points:
            births[int(child)] = float(lam)
    stability = {int(c): 0.0 for c in births}
    for parent, lam, size in zip(tree.parent, tree.lam, tree.size):
        birth = births[int(parent)]
        if np.isinf(birth):
            continue
        stability[int(parent)] += (float(lam) - birth) * int(size)
    return stability


def extract_clusters(tree: CondensedTree, stability: Dict[int, float]) -> List[int]:
    """Excess-of-mass selection over the condensed cluster tree.

    The root can never be selected, so a dataset with no persistent split
    comes back empty (everything is noise).
    """
    root = tree.n_points
    cluster_children: Dict[int, List[int]] = {c: [] for c in stability}
    for parent, child in zip(tree.parent, tree.child):
        if child >= tree.n_points:
            cluster_children[int(parent)].append(int(child))
    stab = dict(stability)
    selected = {c: True for c in stab if c != root}
    for node in sorted(stab, reverse=True):
        if node == root:
            continue
        subtree = sum(stab[c] for c in cluster_children[node])
        if cluster_children[node] and subtree > stab[node]:
            selected[node] = False
            stab[node] = subtree
        else:
            # node wins: deselect every cluster strictly below it
            queue = list(cluster_children[node])
            while queue:
                below = queue.pop()
                selected[below] = False
                queue.extend(cluster_children[below])
    return sorted(c for c, keep in selected.items() if keep)


def flat_labels(tree: CondensedTree, selected: Sequence[int]
                ) -> Tuple[np.ndarray, Dict[int, int]]:
    """Hard labels from a selection: each point belongs to the selected
    cluster its fall-out row sits under, or -1 when none is above it.

    Cluster ids are canonical, 0..k-1 ordered by smallest member index.
    Also returns the map from canonical id to condensed cluster id.
    """
    n = tree.n_points
    chosen = set(int(c) for c in selected)
    parent_of = {int(c): int(p) for p, c in zip(tree.parent, tree.child)
                 if c >= n}
    point_parent = {int(c): int(p) for p, c in zip(tree.parent, tree.child)
                    if c < n}
    raw = np.full(n, -1, dtype=int)
    for p in range(n):
        cur = point_parent.get(p, tree.n_points)
        while True:
            if cur in chosen:
                raw[p] = cur
                break
            if cur not in parent_of:
                break
            cur = parent_of[cur]
    labels = np.full(n, -1, dtype=int)
    order = sorted(chosen, key=lambda c: int(np.flatnonzero(raw == c).min()))
    id_map: Dict[int, int] = {}
    for new_id, c in enumerate(order):
        labels[raw == c] = new_id
        id_map[new_id] = c
    return labels, id_map


class HdbscanClusterer(BaseEstimator, ClusterMixin):
    """Density-based hierarchical clusterer with stability-based extraction.

    After ``fit``:
      labels_        raw flat labels, -1 marks noise
      stabilities_   persistence score per raw label id
      mst_weight_    total weight of the mutual-reachability spanning tree
    """

    def __init__(self, min_cluster_size: int = 3, min_samples: int = 1,
                 metric: str = "euclidean"):
        self.min_cluster_size = min_cluster_size
        self.min_samples = min_samples
        self.metric = metric

    def fit(self, X, y=None):
        params = HdbscanParams(self.min_cluster_size, self.min_samples, self.metric)
        X = check_array(X, dtype=DTYPE)
        n = X.shape[0]
        if n < params.min_cluster_size:
            raise ConfigurationError(
                f"need at least min_cluster_size={params.min_cluster_size} points, got {n}")
        dist = pairwise_distances(X, params.metric)
        core = core_distances(dist, params.min_samples)
        mreach = mutual_reachability(dist, core)
        mst = prim_mst(mreach)
        self.mst_weight_ = float(mst[:, 2].sum())
        children, heights, _ = single_linkage_tree(mst, n)
        tree = condense_tree(children, heights, n, params.min_cluster_size)
        stability = cluster_stabilities(tree)
        chosen = extract_clusters(tree, stability)
        self.labels_, id_map = flat_labels(tree, chosen)
        self.stabilities_ = {new_id: float(stability[cond])
                             for new_id, cond in id_map.items()}
        self.n_clusters_ = len(chosen)
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


class KMeansClusterer(BaseEstimator, ClusterMixin):
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` runs.

    Empty clusters are repaired by reseeding the centroid onto the point
    farthest from its current centre. Deterministic for a given seed.
    """

    def __init__(self, n_clusters: int = 4, restarts: int = 20,
                 max_iter: int = 100, seed: int = 0):
        self.n_clusters = n_clusters
        self.restarts = restarts
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None):
        if self.n_clusters <= 0:
            raise ConfigurationError(f"n_clusters must be positive, got {self.n_clusters}")
        X = check_array(X, dtype=DTYPE)
        n = X.shape[0]
        if n < self.n_clusters:
            raise ConfigurationError(
                f"need at least n_clusters={self.n_clusters} points, got {n}")
        best = None
        for restart in range(self.restarts):
            rng = rng_stream(self.seed, "kmeans", restart)
            centers, labels, inertia = _lloyd(X, self.n_clusters, rng, self.max_iter)
            if best is None or inertia < best[2]:
                best = (centers, labels, inertia)
        self.cluster_centers_, self.labels_, self.inertia_ = best
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=DTYPE)
    centers[0] = X[int(rng.integers(n))]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[i] = X[idx]
        closest = np.minimum(closest, np.sum((X - centers[i]) ** 2, axis=1))
    return centers


def _assign(X: np.ndarray, centers: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int) -> Tuple[np.ndarray, np.ndarray, float]:
    centers = _kmeans_pp(X, k, rng)
    labels, dist2 = _assign(X, centers)
    inertia = float(dist2.sum())
    for _ in range(max_iter):
        for c in range(k):
            mask = labels == c
            if mask.any():
                centers[c] = X[mask].mean(axis=0)
            else:
                # reseed an empty cluster onto the worst-served point
                centers[c] = X[int(np.argmax(dist2))]
        new_labels, dist2 = _assign(X, centers)
        new_inertia = float(dist2.sum())
        assert new_inertia <= inertia + 1e-9, "Lloyd iteration increased inertia"
        if np.array_equal(new_labels, labels) and new_inertia >= inertia - 1e-15:
            inertia = new_inertia
            break
        labels, inertia = new_labels, new_inertia
    return centers, labels, inertia


def _renumber_by_first_member(labels: np.ndarray) -> Tuple[np.ndarray, int]:
    """Renumber cluster ids so id order follows each cluster's earliest tweet."""
    out = np.empty_like(labels)
    mapping: Dict[int, int] = {}
    for idx, lab in enumerate(labels):
        if int(lab) not in mapping:
            mapping[int(lab)] = len(mapping)
        out[idx] = mapping[int(lab)]
    return out, len(mapping)


def route_residual(raw_labels: np.ndarray, stabilities: Dict[int, float],
                   e_max: int = E_MAX_DEFAULT) -> ClusterAssignment:
    """Merge noise (and, if needed, the lowest-stability clusters) into one
    residual cluster so every tweet keeps a label and the count stays <= e_max."""
    if e_max < 1:
        raise ConfigurationError(f"e_max must be >= 1, got {e_max}")
    labels = np.asarray(raw_labels, dtype=int).copy()
    cluster_ids = sorted(set(labels.tolist()) - {-1})
    has_residual = bool((labels == -1).any())
    if not cluster_ids and not has_residual:
        raise ConsistencyError("empty label array")
    while len(cluster_ids) + int(has_residual) > e_max:
        weakest = min(cluster_ids, key=lambda c: (stabilities.get(c, 0.0), c))
        labels[labels == weakest] = -1
        cluster_ids.remove(weakest)
        has_residual = True
    if not cluster_ids:
        labels[:] = 0
        return ClusterAssignment(labels=labels, n_clusters=1)
    final, count = _renumber_by_first_member(labels)
    return ClusterAssignment(labels=final, n_clusters=count)


def hdbscan_fit(points: np.ndarray, params: HdbscanParams,
                e_max: int = E_MAX_DEFAULT) -> ClusterAssignment:
    """Full density-clustering pipeline for one user's tweet embeddings,
    residual routing included. Degenerate inputs collapse to one cluster."""
    points = np.asarray(points, dtype=DTYPE)
    n = points.shape[0]
    if n < max(2, params.min_cluster_size):
        return ClusterAssignment(labels=np.zeros(n, dtype=int), n_clusters=1)
    clusterer = HdbscanClusterer(**params.to_dict()).fit(points)
    return route_residual(clusterer.labels_, clusterer.stabilities_, e_max)


def kmeans_fit(points: np.ndarray, k: int, restarts: int = 20,
               seed: int = 0) -> Tuple[ClusterAssignment, np.ndarray]:
    """Best-of-restarts k-means returning the assignment and the centroids."""
    est = KMeansClusterer(n_clusters=k, restarts=restarts, seed=seed).fit(points)
    labels, count = _renumber_by_first_member(est.labels_)
    order = [est.labels_[np.flatnonzero(labels == c)[0]] for c in range(count)]
    return (ClusterAssignment(labels=labels, n_clusters=count),
            est.cluster_centers_[order])


def _worker_count() -> int:
    raw = os.environ.get("NARRATIONDEP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def assign_dataset(dataset: Dataset, clusterer: str = "hdbscan",
                   hdbscan_params: HdbscanParams | None = None,
                   kmeans_k: int = 4, e_max: int = E_MAX_DEFAULT,
                   seed: int = 0) -> Dict[str, ClusterAssignment]:
    """Cluster every user's tweets independently.

    Users are processed on a small thread pool capped by the
    NARRATIONDEP_THREADS environment variable; results are reduced in
    dataset order either way.
    """
    params = hdbscan_params or HdbscanParams()

    def one(user: UserRecord) -> ClusterAssignment:
        points = sentence_embed(user)
        if clusterer == "hdbscan":
            return hdbscan_fit(points, params, e_max)
        if clusterer == "kmeans":
            k = min(kmeans_k, points.shape[0], e_max)
            assignment, _ = kmeans_fit(points, max(1, k), seed=seed)
            return assignment
        raise ConfigurationError(f"unknown clusterer {clusterer!r}")

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, dataset.users))
    else:
        results = [one(u) for u in dataset.users]
    return {u.user_id: a for u, a in zip(dataset.users, results)}


def save_assignments(assignments: Dict[str, ClusterAssignment], path: str | Path,
                     params: HdbscanParams | None = None) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for user_id, a in assignments.items():
            obj = {"user_id": user_id, "labels": a.labels.tolist(), "E": a.n_clusters}
            if params is not None:
                obj["params"] = params.to_dict()
            fh.write(json.dumps(obj) + "\n")


def load_assignments(path: str | Path) -> Dict[str, ClusterAssignment]:
    out: Dict[str, ClusterAssignment] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out[obj["user_id"]] = ClusterAssignment(
                    labels=np.asarray(obj["labels"], dtype=int),
                    n_clusters=int(obj["E"]))
            except (KeyError, ValueError) as exc:
                raise DataError(f"line {line_no}: bad assignment record") from exc
    return out


def tune_clustering(train_users: List[UserRecord], val_users: List[UserRecord],
                    search_budget: int, seed: int,
                    e_max: int = E_MAX_DEFAULT,
                    short_epochs: int = 2, short_hidden: int = 6,
                    max_train: int = 48, max_val: int = 32) -> HdbscanParams:
    """Randomized search over density-clustering parameters.

    Each candidate is scored by the validation F1 of a short training run
    using that candidate's assignments; ties prefer smaller
    min_cluster_size. Deterministic for a given seed.
    """
    if search_budget < 1:
        raise ConfigurationError(f"search_budget must be >= 1, got {search_budget}")
    if not val_users:
        raise ConfigurationError("tune_clustering needs a non-empty validation set")
    from .model import score_clustering_candidate  # local import avoids a cycle

    rng = rng_stream(seed, "tune")
    candidates = []
    for _ in range(search_budget):
        mcs = int(rng.integers(2, 16))
        ms = int(rng.integers(1, mcs + 1))
        metric = METRICS[int(rng.integers(0, len(METRICS)))]
        candidates.append(HdbscanParams(mcs, ms, metric))
    train_subset = train_users[:max_train]
    val_subset = val_users[:max_val]
    scored = []
    for idx, params in enumerate(candidates):
        f1 = score_clustering_candidate(train_subset, val_subset, params,
                                        e_max=e_max, seed=seed,
                                        epochs=short_epochs, d_hidden=short_hidden)
        scored.append((-f1, params.min_cluster_size, params.min_samples,
                       METRICS.index(params.metric), idx, params))
    scored.sort(key=lambda t: t[:5])
    return scored[0][5]
