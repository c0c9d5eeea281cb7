"""Narrative explanations from attention traces: cluster rankings,
per-tweet salience for heatmaps, and weekday/hourly temporal profiles.

Salience is multiplicative across levels: a tweet's score is its cluster's
attention weight times its own weight within that cluster, so scores sum
to one over the user's timeline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from .data import UserRecord
from .errors import ConsistencyError, InputError
from .trace import AttentionTrace

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


@dataclass
class RankedCluster:
    cluster_id: int
    weight: float
    member_indices: List[int]
    texts: List[str | None] = field(default_factory=list)


@dataclass
class NarrativeReport:
    user_id: str
    ranked_clusters: List[RankedCluster]
    salience: np.ndarray
    weekday_profile: np.ndarray
    hourly_profile: np.ndarray

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "ranked_clusters": [
                {
                    "cluster_id": c.cluster_id,
                    "weight": c.weight,
                    "member_indices": list(c.member_indices),
                    "texts": c.texts,
                }
                for c in self.ranked_clusters
            ],
            "salience": self.salience.tolist(),
            "weekday_profile": self.weekday_profile.tolist(),
            "hourly_profile": self.hourly_profile.tolist(),
        }


def rank_clusters(trace: AttentionTrace) -> List[int]:
    """Cluster ids by descending attention weight, ties by ascending id."""
    weights = trace.cluster_weights
    return sorted(range(len(weights)), key=lambda c: (-weights[c], c))


def tweet_salience(trace: AttentionTrace) -> np.ndarray:
    """Per-tweet scores: cluster weight times within-cluster weight."""
    n = trace.n_tweets
    covered = np.zeros(n, dtype=bool)
    for members in trace.member_indices:
        covered[members] = True
    if not covered.all():
        raise ConsistencyError("cluster membership does not cover every tweet")
    salience = trace.cluster_weights[trace.membership] * trace.within_weight_per_tweet()
    return salience


def temporal_profile(user: UserRecord, salience: np.ndarray,
                     granularity: str = "weekday") -> np.ndarray:
    """Sum salience into UTC weekday (Monday-first) or hour buckets and
    normalize to a probability vector; untouched buckets stay zero."""
    if len(user.tweets) != salience.shape[0]:
        raise InputError(
            f"salience length {salience.shape[0]} does not match "
            f"{len(user.tweets)} tweets")
    if granularity == "weekday":
        profile = np.zeros(7)
        for tweet, s in zip(user.tweets, salience):
            if tweet.ts is None:
                raise InputError("tweet without timestamp")
            profile[tweet.ts.weekday()] += s
    elif granularity == "hour":
        profile = np.zeros(24)
        for tweet, s in zip(user.tweets, salience):
            if tweet.ts is None:
                raise InputError("tweet without timestamp")
            profile[tweet.ts.hour] += s
    else:
        raise InputError(f"granularity must be weekday or hour, got {granularity!r}")
    total = profile.sum()
    return profile / total if total > 0 else profile


def build_report(user: UserRecord, trace: AttentionTrace) -> NarrativeReport:
    salience = tweet_salience(trace)
    order = rank_clusters(trace)
    ranked = []
    for cid in order:
        members = trace.member_indices[cid]
        ranked.append(RankedCluster(
            cluster_id=cid,
            weight=float(trace.cluster_weights[cid]),
            member_indices=[int(i) for i in members],
            texts=[user.tweets[int(i)].text for i in members],
        ))
    return NarrativeReport(
        user_id=user.user_id,
        ranked_clusters=ranked,
        salience=salience,
        weekday_profile=temporal_profile(user, salience, "weekday"),
        hourly_profile=temporal_profile(user, salience, "hour"),
    )


def export_report(report: NarrativeReport, path: str | Path,
                  fmt: str = "json") -> None:
    """Write the report: full JSON, or heatmap-ready CSV rows
    (tweet index, salience, cluster id, optional text)."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2)
                        + "\n", encoding="utf-8")
    elif fmt == "csv":
        membership = np.full(report.salience.shape[0], -1, dtype=int)
        texts: List[str | None] = [None] * report.salience.shape[0]
        for cluster in report.ranked_clusters:
            for pos, idx in enumerate(cluster.member_indices):
                membership[idx] = cluster.cluster_id
                texts[idx] = cluster.texts[pos] if pos < len(cluster.texts) else None
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tweet_index", "salience", "cluster_id", "text"])
            for idx, s in enumerate(report.salience):
                writer.writerow([idx, repr(float(s)), int(membership[idx]),
                                 texts[idx] or ""])
    else:
        raise InputError(f"format must be json or csv, got {fmt!r}")


def load_report(path: str | Path) -> NarrativeReport:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return NarrativeReport(
        user_id=obj["user_id"],
        ranked_clusters=[
            RankedCluster(cluster_id=c["cluster_id"], weight=c["weight"],
                          member_indices=list(c["member_indices"]),
                          texts=list(c["texts"]))
            for c in obj["ranked_clusters"]
        ],
        salience=np.asarray(obj["salience"]),
        weekday_profile=np.asarray(obj["weekday_profile"]),
        hourly_profile=np.asarray(obj["hourly_profile"]),
    )
