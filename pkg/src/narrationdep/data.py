"""Canonical user/tweet data model, JSONL ingestion, preprocessing filters
and cross-validation splits.

The on-disk format is UTF-8 JSON Lines. The first line is a manifest
``{"format": "narrationdep-emb/1", "d_w": N}``; every following line is one
user record with per-tweet timestamps and token embedding matrices. Tweet
order in the file is trusted as chronological and never re-sorted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List

import numpy as np

from .errors import ConfigurationError, DataError
from .numerics import DTYPE, rng_stream

EMB_FORMAT = "narrationdep-emb/1"

# Sequence bounds applied at ingestion: tokens beyond Q_MAX are dropped from
# the tail of the tweet, users keep only their L_MAX most recent tweets.
Q_MAX_DEFAULT = 64
L_MAX_DEFAULT = 200


@dataclass(eq=False)
class TweetRecord:
    """One tweet: a UTC timestamp plus a (n_tokens, d_w) embedding matrix."""

    ts: datetime
    tokens: np.ndarray
    text: str | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, TweetRecord):
            return NotImplemented
        return (
            self.ts == other.ts
            and self.text == other.text
            and self.tokens.shape == other.tokens.shape
            and np.array_equal(self.tokens, other.tokens)
        )


@dataclass(eq=False)
class UserRecord:
    user_id: str
    label: int
    tweets: List[TweetRecord]

    def __eq__(self, other) -> bool:
        if not isinstance(other, UserRecord):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.label == other.label
            and self.tweets == other.tweets
        )


@dataclass(eq=False)
class Dataset:
    users: List[UserRecord]
    d_w: int | None

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.d_w == other.d_w and self.users == other.users

    def __len__(self) -> int:
        return len(self.users)

    def labels(self) -> np.ndarray:
        return np.array([u.label for u in self.users], dtype=int)

    def by_id(self) -> dict[str, UserRecord]:
        return {u.user_id: u for u in self.users}


@dataclass(frozen=True)
class FoldSplit:
    fold: int
    train_ids: frozenset[str]
    test_ids: frozenset[str]


def _parse_ts(raw: str, line_no: int) -> datetime:
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise DataError(f"line {line_no}: unparseable timestamp {raw!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def load_jsonl(path: str | Path, q_max: int = Q_MAX_DEFAULT,
               l_max: int = L_MAX_DEFAULT) -> Dataset:
    """Load and validate an embedding file.

    Raises :class:`DataError` naming the offending line on any schema
    violation: bad manifest, inconsistent embedding dimension, empty token
    lists, duplicate user ids, or unparseable JSON.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"embedding file not found: {path}")
    users: List[UserRecord] = []
    seen_ids: set[str] = set()
    d_w: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
            if line_no == 1:
                if obj.get("format") != EMB_FORMAT:
                    raise DataError(
                        f"line 1: expected manifest with format {EMB_FORMAT!r}, "
                        f"got {obj.get('format')!r}"
                    )
                d_w = int(obj["d_w"])
                if d_w <= 0:
                    raise DataError(f"line 1: d_w must be positive, got {d_w}")
                continue
            users.append(_parse_user(obj, line_no, d_w, seen_ids, q_max, l_max))
    return Dataset(users=users, d_w=d_w)


def _parse_user(obj: dict, line_no: int, d_w: int | None, seen_ids: set[str],
                q_max: int, l_max: int) -> UserRecord:
    if d_w is None:
        raise DataError(f"line {line_no}: user record before manifest line")
    try:
        user_id = str(obj["user_id"])
        label = int(obj["label"])
        raw_tweets = obj["tweets"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"line {line_no}: missing or malformed user fields") from exc
    if label not in (0, 1):
        raise DataError(f"line {line_no}: label must be 0 or 1, got {label}")
    if user_id in seen_ids:
        raise DataError(f"line {line_no}: duplicate user_id {user_id!r}")
    seen_ids.add(user_id)
    if not raw_tweets:
        raise DataError(f"line {line_no}: user {user_id!r} has no tweets")
    tweets: List[TweetRecord] = []
    for raw in raw_tweets[-l_max:]:
        ts = _parse_ts(raw["ts"], line_no)
        token_rows = raw.get("tokens")
        if not token_rows:
            raise DataError(f"line {line_no}: tweet with empty token list")
        tokens = np.asarray(token_rows[:q_max], dtype=DTYPE)
        if tokens.ndim != 2 or tokens.shape[1] != d_w:
            raise DataError(
                f"line {line_no}: token vectors must have dimension {d_w}, "
                f"got shape {tokens.shape}"
            )
        tweets.append(TweetRecord(ts=ts, tokens=tokens, text=raw.get("text")))
    return UserRecord(user_id=user_id, label=label, tweets=tweets)


def write_jsonl(dataset: Dataset, path: str | Path) -> None:
    """Serialize a dataset; floats keep full precision so load(write(d)) == d."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if dataset.d_w is None and not dataset.users:
            return
        fh.write(json.dumps({"format": EMB_FORMAT, "d_w": dataset.d_w}) + "\n")
        for user in dataset.users:
            obj = {
                "user_id": user.user_id,
                "label": user.label,
                "tweets": [
                    {
                        "ts": _format_ts(t.ts),
                        "tokens": t.tokens.tolist(),
                        **({"text": t.text} if t.text is not None else {}),
                    }
                    for t in user.tweets
                ],
            }
            fh.write(json.dumps(obj) + "\n")


def filter_min_tweets(dataset: Dataset, min_tweets: int = 10) -> Dataset:
    """Drop users with fewer than ``min_tweets`` tweets, preserving order."""
    kept = [u for u in dataset.users if len(u.tweets) >= min_tweets]
    return Dataset(users=kept, d_w=dataset.d_w)


def kfold_split(dataset: Dataset, k: int = 5, seed: int = 0) -> List[FoldSplit]:
    """Shuffled k-fold partition of user ids, deterministic for a seed.

    Fold sizes differ by at most one user; together the test folds cover
    every user exactly once.
    """
    n = len(dataset.users)
    if n < k:
        raise ConfigurationError(f"cannot split {n} users into {k} folds")
    # shuffle sorted ids so folds do not depend on user insertion order
    ids = sorted(u.user_id for u in dataset.users)
    order = rng_stream(seed, "kfold").permutation(n)
    chunks = np.array_split(order, k)
    splits = []
    for fold, chunk in enumerate(chunks):
        test = frozenset(ids[i] for i in chunk)
        train = frozenset(ids[i] for i in range(n) if ids[i] not in test)
        splits.append(FoldSplit(fold=fold, train_ids=train, test_ids=test))
    return splits


def select_users(dataset: Dataset, ids: Iterable[str]) -> List[UserRecord]:
    """Users in dataset order whose id is in ``ids``."""
    wanted = set(ids)
    return [u for u in dataset.users if u.user_id in wanted]
