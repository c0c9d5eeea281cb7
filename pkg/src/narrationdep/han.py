"""Hierarchical attention over the raw tweet sequence: word-level encoding
pools each tweet into a vector, then tweet-level encoding pools the user's
chronological tweet sequence into a single user representation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

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
from .errors import InputError


@dataclass
class HanParams:
    """Word-level and tweet-level encoder/attention parameters."""

    word: LevelParams
    tweet: LevelParams


@dataclass
class HanForward:
    user_vector: np.ndarray          # pooled representation, dim 2 * d_hidden
    tweet_weights: np.ndarray        # attention over tweets, sums to 1
    word_weights: List[np.ndarray]   # attention over words within each tweet
    word: WordStage
    tweet_cache: EncodeAttendCache


def han_encode(user: UserRecord, p: HanParams,
               word: WordStage | None = None) -> HanForward:
    """Encode a user's full tweet history.

    ``word`` lets the caller pass a precomputed word stage when the
    word-level parameters are shared with the cluster branch.
    """
    if not user.tweets:
        raise InputError(f"user {user.user_id!r} has no tweets")
    if word is None:
        word = word_stage([t.tokens for t in user.tweets], p.word)
    user_vector, tweet_weights, tweet_cache = encode_and_attend(word.vectors, p.tweet)
    return HanForward(user_vector=user_vector, tweet_weights=tweet_weights,
                      word_weights=word.word_weights, word=word,
                      tweet_cache=tweet_cache)


def han_backward(dvec: np.ndarray, fwd: HanForward, p: HanParams,
                 grads: Gradients, tweet_prefix: str = "han_tweet") -> np.ndarray:
    """Backprop down to the word-stage outputs; returns d(tweet vectors).

    The word stage itself is backpropagated by the caller, which knows
    whether it is shared with the other branch.
    """
    return encode_and_attend_backward(dvec, fwd.tweet_cache, p.tweet,
                                      grads, tweet_prefix)
