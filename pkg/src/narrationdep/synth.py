"""Synthetic labelled datasets for desk-scale verification.

Each generator draws per-theme Gaussian centers, assembles users whose
tweets are noisy draws around theme centers, and spreads timestamps
uniformly over one simulated month. Theme 0 is the designated "depressive"
theme: depressed users draw a majority of their tweets from it, while
non-depressed users draw only from the remaining themes.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import List, Tuple

import numpy as np

from .data import Dataset, TweetRecord, UserRecord
from .errors import ConfigurationError
from .numerics import DTYPE, rng_stream

_EPOCH = datetime(2016, 12, 1, tzinfo=timezone.utc)
_MONTH_SECONDS = 30 * 24 * 3600


def _theme_centers(n_themes: int, d_w: int, rng: np.random.Generator,
                   separation: float) -> np.ndarray:
    """Random centers rescaled so the closest pair sits ``separation`` apart."""
    centers = rng.standard_normal((n_themes, d_w))
    diffs = centers[:, None, :] - centers[None, :, :]
    dists = np.sqrt((diffs ** 2).sum(axis=2))
    min_dist = dists[~np.eye(n_themes, dtype=bool)].min()
    return (centers * (separation / min_dist)).astype(DTYPE)


def _timestamps(count: int, rng: np.random.Generator) -> List[datetime]:
    offsets = np.sort(rng.uniform(0, _MONTH_SECONDS, size=count))
    return [_EPOCH + timedelta(seconds=float(s)) for s in offsets]


def _make_tweet(center: np.ndarray, sigma: float, ts: datetime,
                rng: np.random.Generator,
                tokens_range: Tuple[int, int]) -> TweetRecord:
    n_tokens = int(rng.integers(tokens_range[0], tokens_range[1] + 1))
    noise = rng.standard_normal((n_tokens, center.shape[0])) * sigma
    return TweetRecord(ts=ts, tokens=(center[None, :] + noise).astype(DTYPE))


def synth_generate(n_users: int, tweets_per_user: int, d_w: int, n_themes: int,
                   noise_sigma: float, seed: int,
                   tokens_range: Tuple[int, int] = (4, 8),
                   depressive_fraction: float = 0.7,
                   center_separation: float = 1.0) -> Dataset:
    """Themed dataset: depressed users post mostly from the depressive theme.

    Labels are balanced within one user; token vectors are theme center plus
    isotropic N(0, noise_sigma^2) noise.
    """
    if n_themes < 2:
        raise ConfigurationError(f"n_themes must be >= 2, got {n_themes}")
    rng = rng_stream(seed, "synth")
    centers = _theme_centers(n_themes, d_w, rng, center_separation)
    users = []
    for idx in range(n_users):
        label = idx % 2
        ts_list = _timestamps(tweets_per_user, rng)
        if label == 1:
            n_dep = max(tweets_per_user // 2 + 1,
                        int(round(depressive_fraction * tweets_per_user)))
            themes = [0] * n_dep + [
                int(rng.integers(1, n_themes)) for _ in range(tweets_per_user - n_dep)
            ]
            rng.shuffle(themes)
        else:
            themes = [int(rng.integers(1, n_themes)) for _ in range(tweets_per_user)]
        tweets = [
            _make_tweet(centers[theme], noise_sigma, ts, rng, tokens_range)
            for theme, ts in zip(themes, ts_list)
        ]
        users.append(UserRecord(user_id=f"u{idx:04d}", label=label, tweets=tweets))
    return Dataset(users=users, d_w=d_w)


def synth_two_signal(n_users: int, tweets_per_user: int, d_w: int, n_themes: int,
                     noise_sigma: float, seed: int,
                     tokens_range: Tuple[int, int] = (4, 8),
                     center_separation: float = 1.0) -> Dataset:
    """Dataset whose label needs both a theme signal and a tweet-order cue.

    Positive users post a block of depressive-theme tweets at the end of
    their timeline. Negative users either post the same block at the start
    (theme present, order cue absent) or avoid the theme entirely.
    """
    if n_themes < 3:
        raise ConfigurationError(f"two-signal data needs n_themes >= 3, got {n_themes}")
    rng = rng_stream(seed, "synth-two-signal")
    centers = _theme_centers(n_themes, d_w, rng, center_separation)
    n_dep = max(2, int(round(0.4 * tweets_per_user)))
    users = []
    for idx in range(n_users):
        label = idx % 2
        ts_list = _timestamps(tweets_per_user, rng)
        filler = [int(rng.integers(1, n_themes)) for _ in range(tweets_per_user - n_dep)]
        if label == 1:
            themes = filler + [0] * n_dep
        elif idx % 4 == 0:
            themes = [0] * n_dep + filler
        else:
            themes = [int(rng.integers(1, n_themes)) for _ in range(tweets_per_user)]
        tweets = [
            _make_tweet(centers[theme], noise_sigma, ts, rng, tokens_range)
            for theme, ts in zip(themes, ts_list)
        ]
        users.append(UserRecord(user_id=f"u{idx:04d}", label=label, tweets=tweets))
    return Dataset(users=users, d_w=d_w)


def synth_theme_mixture(n_users: int, d_w: int, seed: int,
                        dep_counts: Tuple[int, int, int] = (3, 3, 12),
                        non_counts: Tuple[int, int, int] = (6, 6, 6),
                        noise_sigma: float = 0.05,
                        spread: float = 1.5) -> Dataset:
    """Mean-matched three-theme dataset probing cluster granularity.

    Theme centers are A, B and their midpoint M; per-class theme counts
    keep the A/B counts equal, so every user's mean embedding sits at M and
    any attention that scores tweets by content alone pools to M for both
    classes. The label lives in the mixing proportions, which per-theme
    clusters expose through the cluster sequence while a single collapsed
    cluster hides them.
    """
    if len(dep_counts) != 3 or len(non_counts) != 3:
        raise ConfigurationError("theme mixture uses exactly three themes")
    if dep_counts[0] != dep_counts[1] or non_counts[0] != non_counts[1]:
        raise ConfigurationError("A/B counts must match within each class")
    if sum(dep_counts) != sum(non_counts):
        raise ConfigurationError("classes must share the tweet count")
    rng = rng_stream(seed, "synth-mixture")
    a = rng.standard_normal(d_w)
    a *= spread / np.linalg.norm(a)
    b = rng.standard_normal(d_w)
    b *= spread / np.linalg.norm(b)
    themes = [a, b, (a + b) / 2.0]
    total = sum(dep_counts)
    users = []
    for idx in range(n_users):
        label = idx % 2
        counts = dep_counts if label == 1 else non_counts
        seq: List[int] = sum(([t] * c for t, c in enumerate(counts)), [])
        rng.shuffle(seq)
        ts_list = _timestamps(total, rng)
        tweets = [
            _make_tweet(themes[theme], noise_sigma, ts, rng, (4, 8))
            for theme, ts in zip(seq, ts_list)
        ]
        users.append(UserRecord(user_id=f"u{idx:04d}", label=label, tweets=tweets))
    return Dataset(users=users, d_w=d_w)


def synth_variable_density(n_users: int, tweets_per_user: int, d_w: int,
                           n_themes: int, seed: int,
                           sigma_range: Tuple[float, float] = (0.03, 0.22),
                           tokens_range: Tuple[int, int] = (4, 8),
                           depressive_fraction: float = 0.7,
                           center_separation: float = 1.0) -> Dataset:
    """Themed dataset where each theme has its own spread (variable density)."""
    if n_themes < 2:
        raise ConfigurationError(f"n_themes must be >= 2, got {n_themes}")
    rng = rng_stream(seed, "synth-vardensity")
    centers = _theme_centers(n_themes, d_w, rng, center_separation)
    sigmas = np.linspace(sigma_range[0], sigma_range[1], n_themes)
    users = []
    for idx in range(n_users):
        label = idx % 2
        ts_list = _timestamps(tweets_per_user, rng)
        if label == 1:
            n_dep = max(tweets_per_user // 2 + 1,
                        int(round(depressive_fraction * tweets_per_user)))
            themes = [0] * n_dep + [
                int(rng.integers(1, n_themes)) for _ in range(tweets_per_user - n_dep)
            ]
            rng.shuffle(themes)
        else:
            themes = [int(rng.integers(1, n_themes)) for _ in range(tweets_per_user)]
        tweets = [
            _make_tweet(centers[theme], float(sigmas[theme]), ts, rng, tokens_range)
            for theme, ts in zip(themes, ts_list)
        ]
        users.append(UserRecord(user_id=f"u{idx:04d}", label=label, tweets=tweets))
    return Dataset(users=users, d_w=d_w)
