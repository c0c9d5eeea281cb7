import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from narrationdep.data import Dataset, TweetRecord, UserRecord
from narrationdep.numerics import rng_stream


def make_user(user_id: str, label: int, token_matrices, hour: int = 12) -> UserRecord:
    """User with one tweet per token matrix, hourly timestamps."""
    tweets = []
    for i, tokens in enumerate(token_matrices):
        ts = datetime(2016, 12, 1 + i // 24, (hour + i) % 24, 0, tzinfo=timezone.utc)
        tweets.append(TweetRecord(ts=ts, tokens=np.asarray(tokens, dtype=float)))
    return UserRecord(user_id=user_id, label=label, tweets=tweets)


def random_user(user_id: str, label: int, n_tweets: int, d_w: int,
                seed: int, max_tokens: int = 5) -> UserRecord:
    rng = rng_stream(seed, "fixture", user_id)
    mats = [rng.standard_normal((int(rng.integers(1, max_tokens + 1)), d_w))
            for _ in range(n_tweets)]
    return make_user(user_id, label, mats)


@pytest.fixture
def tiny_dataset() -> Dataset:
    users = [random_user(f"u{i}", i % 2, n_tweets=3, d_w=4, seed=i) for i in range(4)]
    return Dataset(users=users, d_w=4)
