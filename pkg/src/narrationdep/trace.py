"""Attention weights recorded during a forward pass, the raw material for
narrative explanations. Every weight family is a probability vector over
its own support.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass
class AttentionTrace:
    """All attention families for one user.

    han_word_weights[i]   word weights inside tweet i (sequence branch)
    han_tweet_weights     weights over the raw tweet sequence
    hacn_word_weights[i]  word weights inside tweet i (cluster branch);
                          identical to the sequence branch when the word
                          level is shared
    within_cluster_weights[c]  weights over the tweets of cluster c
    cluster_weights       weights over the cluster sequence
    membership            cluster id per tweet
    member_indices[c]     tweet indices belonging to cluster c
    """

    han_word_weights: List[np.ndarray]
    han_tweet_weights: np.ndarray
    hacn_word_weights: List[np.ndarray]
    within_cluster_weights: List[np.ndarray]
    cluster_weights: np.ndarray
    membership: np.ndarray
    member_indices: List[np.ndarray]

    @property
    def n_tweets(self) -> int:
        return int(self.membership.shape[0])

    @property
    def n_clusters(self) -> int:
        return int(self.cluster_weights.shape[0])

    def within_weight_per_tweet(self) -> np.ndarray:
        """Each tweet's attention weight inside its own cluster."""
        out = np.zeros(self.n_tweets)
        for cid, (weights, members) in enumerate(
                zip(self.within_cluster_weights, self.member_indices)):
            out[members] = weights
        return out
