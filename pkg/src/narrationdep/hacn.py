"""Hierarchical attention over tweet clusters: word-level encoding pools
each tweet, within-cluster attention pools each cluster's tweets into a
cluster vector, cluster-level encoding pools the cluster sequence, and a
nonlinear projection produces the behavioural representation.

Clusters enter the cluster-level encoder ordered by ascending cluster id;
ids are assigned upstream by each cluster's earliest tweet, which makes the
sequence order deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .clustering import ClusterAssignment
from .data import UserRecord
from .encoder import (
    EncodeAttendCache,
    Gradients,
    LevelParams,
    WordStage,
    encode_and_attend,
    encode_and_attend_backward,
    word_stage,
)
from .errors import ConsistencyError, InputError
from .numerics import DTYPE


@dataclass
class HacnParams:
    """Word, within-cluster, and cluster-level parameters plus the
    behavioural projection. ``word`` may be the same object as the other
    branch's word level when sharing is enabled."""

    word: LevelParams
    within: LevelParams
    cluster: LevelParams
    proj_w: np.ndarray
    proj_b: np.ndarray


@dataclass
class ClusterVector:
    cluster_id: int
    vector: np.ndarray
    tweet_weights: np.ndarray
    member_indices: np.ndarray


@dataclass
class HacnForward:
    behaviour: np.ndarray                  # projected representation, dim d_p
    cluster_weights: np.ndarray            # attention over clusters, sums to 1
    clusters: List[ClusterVector]
    word_weights: List[np.ndarray]
    word: WordStage
    summary: np.ndarray                    # pooled cluster sequence, 2 * d_hidden
    cluster_cache: EncodeAttendCache
    within_caches: List[EncodeAttendCache]


def encode_cluster(member_vectors: np.ndarray, p: HacnParams, cluster_id: int,
                   member_indices: np.ndarray
                   ) -> Tuple[ClusterVector, EncodeAttendCache]:
    """Pool one cluster's tweet vectors into a cluster vector."""
    if member_vectors.shape[0] == 0:
        raise InputError(f"cluster {cluster_id} is empty")
    vec, weights, cache = encode_and_attend(member_vectors, p.within)
    return ClusterVector(cluster_id=cluster_id, vector=vec, tweet_weights=weights,
                         member_indices=member_indices), cache


def encode_cluster_sequence(cluster_vectors: np.ndarray, p: HacnParams
                            ) -> Tuple[np.ndarray, np.ndarray, EncodeAttendCache]:
    """Pool the ordered cluster vectors into one summary vector."""
    if cluster_vectors.shape[0] == 0:
        raise InputError("cannot encode an empty cluster sequence")
    return encode_and_attend(cluster_vectors, p.cluster)


def behavioural_projection(summary: np.ndarray, p: HacnParams) -> np.ndarray:
    """Bounded nonlinear projection of the cluster summary."""
    return np.tanh(p.proj_w @ summary + p.proj_b)


def hacn_encode(user: UserRecord, assignment: ClusterAssignment, p: HacnParams,
                word: WordStage | None = None) -> HacnForward:
    """Encode a user through the cluster branch.

    The assignment must cover every tweet exactly; clusters are processed
    in ascending id order.
    """
    n_tweets = len(user.tweets)
    if assignment.labels.shape != (n_tweets,):
        raise ConsistencyError(
            f"assignment covers {assignment.labels.shape[0]} tweets, "
            f"user {user.user_id!r} has {n_tweets}")
    if word is None:
        word = word_stage([t.tokens for t in user.tweets], p.word)
    clusters: List[ClusterVector] = []
    within_caches: List[EncodeAttendCache] = []
    for cid in range(assignment.n_clusters):
        members = assignment.members(cid)
        if members.size == 0:
            raise ConsistencyError(f"cluster {cid} has no members")
        cluster, cache = encode_cluster(word.vectors[members], p, cid, members)
        clusters.append(cluster)
        within_caches.append(cache)
    cluster_matrix = np.stack([c.vector for c in clusters])
    summary, cluster_weights, cluster_cache = encode_cluster_sequence(cluster_matrix, p)
    behaviour = behavioural_projection(summary, p)
    return HacnForward(behaviour=behaviour, cluster_weights=cluster_weights,
                       clusters=clusters, word_weights=word.word_weights,
                       word=word, summary=summary, cluster_cache=cluster_cache,
                       within_caches=within_caches)


def hacn_backward(dbehaviour: np.ndarray, fwd: HacnForward, p: HacnParams,
                  grads: Gradients, proj_prefix: str = "hacn_proj",
                  cluster_prefix: str = "hacn_cluster",
                  within_prefix: str = "hacn_within") -> np.ndarray:
    """Backprop down to the word-stage outputs; returns d(tweet vectors)."""
    dpre = dbehaviour * (1.0 - fwd.behaviour ** 2)
    grads.add(f"{proj_prefix}.w", np.outer(dpre, fwd.summary))
    grads.add(f"{proj_prefix}.b", dpre)
    dsummary = p.proj_w.T @ dpre
    dcluster_vecs = encode_and_attend_backward(dsummary, fwd.cluster_cache,
                                               p.cluster, grads, cluster_prefix)
    n_tweets = fwd.word.vectors.shape[0]
    dtweet_vecs = np.zeros((n_tweets, fwd.word.vectors.shape[1]), dtype=DTYPE)
    for cluster, cache, dvec in zip(fwd.clusters, fwd.within_caches, dcluster_vecs):
        dmembers = encode_and_attend_backward(dvec, cache, p.within,
                                              grads, within_prefix)
        dtweet_vecs[cluster.member_indices] += dmembers
    return dtweet_vecs
