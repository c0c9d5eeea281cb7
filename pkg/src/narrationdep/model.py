"""Two-branch model: sequence branch and cluster branch fused by
concatenation into a sigmoid classifier, trained with Adam on binary
cross-entropy. Includes the parameter registry, checkpoint format, the
deterministic training loop, and a scikit-learn style estimator wrapper.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .clustering import (
    ClusterAssignment,
    E_MAX_DEFAULT,
    HdbscanParams,
    assign_dataset,
    tune_clustering,
)
from .data import Dataset, UserRecord
from .encoder import (
    LevelParams,
    WordStage,
    init_level_params,
    word_stage,
    word_stage_backward,
)
from .errors import (
    ConfigurationError,
    DataError,
    InputError,
    NumericalError,
)
from .hacn import HacnForward, HacnParams, hacn_backward, hacn_encode
from .han import HanForward, HanParams, han_backward, han_encode
from .numerics import (
    DTYPE,
    AdamState,
    Gradients,
    adam_step,
    rng_stream,
    sigmoid,
    xavier_init,
)
from .trace import AttentionTrace

CKPT_FORMAT = "narrationdep-ckpt/1"

BRANCHES = ("joint", "han", "hacn")


@dataclass(frozen=True)
class ModelDims:
    d_w: int
    d_hidden: int = 8
    d_att: int | None = None
    d_proj: int | None = None
    share_word_level: bool = True

    @property
    def att(self) -> int:
        return self.d_att if self.d_att is not None else self.d_hidden

    @property
    def proj(self) -> int:
        return self.d_proj if self.d_proj is not None else 2 * self.d_hidden

    @property
    def fused(self) -> int:
        return self.proj + 2 * self.d_hidden

    def to_dict(self) -> dict:
        return {"d_w": self.d_w, "d_hidden": self.d_hidden, "d_att": self.att,
                "d_proj": self.proj, "share_word_level": self.share_word_level}


@dataclass
class ModelParams:
    """Every trainable tensor, each registered exactly once."""

    dims: ModelDims
    word: LevelParams
    han_tweet: LevelParams
    hacn_word: LevelParams | None
    hacn_within: LevelParams
    hacn_cluster: LevelParams
    proj_w: np.ndarray
    proj_b: np.ndarray
    fuse_w: np.ndarray
    fuse_b: np.ndarray

    def registry(self) -> Dict[str, np.ndarray]:
        entries = list(self.word.named("word"))
        entries += self.han_tweet.named("han_tweet")
        if self.hacn_word is not None:
            entries += self.hacn_word.named("hacn_word")
        entries += self.hacn_within.named("hacn_within")
        entries += self.hacn_cluster.named("hacn_cluster")
        entries += [("hacn_proj.w", self.proj_w), ("hacn_proj.b", self.proj_b),
                    ("fuse.w", self.fuse_w), ("fuse.b", self.fuse_b)]
        return dict(entries)

    def han_params(self) -> HanParams:
        return HanParams(word=self.word, tweet=self.han_tweet)

    def hacn_params(self) -> HacnParams:
        word = self.word if self.hacn_word is None else self.hacn_word
        return HacnParams(word=word, within=self.hacn_within,
                          cluster=self.hacn_cluster,
                          proj_w=self.proj_w, proj_b=self.proj_b)

    @property
    def hacn_word_prefix(self) -> str:
        return "word" if self.hacn_word is None else "hacn_word"


def init_model_params(dims: ModelDims, seed: int, branch: str = "joint") -> ModelParams:
    """Initialize every tensor from its own named random stream.

    In a branch-only model the other branch's slice of the fusion weight is
    zeroed; its gradients are masked during training so it stays zero.
    """
    if branch not in BRANCHES:
        raise ConfigurationError(f"branch must be one of {BRANCHES}, got {branch!r}")
    d_h, d_a, d_p = dims.d_hidden, dims.att, dims.proj

    def level(name: str, d_in: int) -> LevelParams:
        return init_level_params(d_in, d_h, d_a, rng_stream(seed, "init", name))

    params = ModelParams(
        dims=dims,
        word=level("word", dims.d_w),
        han_tweet=level("han_tweet", 2 * d_h),
        hacn_word=None if dims.share_word_level else level("hacn_word", dims.d_w),
        hacn_within=level("hacn_within", 2 * d_h),
        hacn_cluster=level("hacn_cluster", 2 * d_h),
        proj_w=xavier_init((d_p, 2 * d_h), rng_stream(seed, "init", "proj")),
        proj_b=np.zeros(d_p, DTYPE),
        fuse_w=xavier_init((dims.fused,), rng_stream(seed, "init", "fuse")),
        fuse_b=np.zeros(1, DTYPE),
    )
    if branch == "han":
        params.fuse_w[:d_p] = 0.0
    elif branch == "hacn":
        params.fuse_w[d_p:] = 0.0
    return params


def fuse(behaviour: np.ndarray, user_vector: np.ndarray) -> np.ndarray:
    """Concatenate the cluster-branch and sequence-branch representations."""
    return np.concatenate([behaviour, user_vector])


def classify(fused: np.ndarray, fuse_w: np.ndarray, fuse_b: np.ndarray) -> float:
    """Sigmoid probability of the positive (depressed) class."""
    return float(sigmoid(float(fused @ fuse_w) + float(fuse_b[0])))


def bce_loss(y_hat: float, y: int) -> float:
    """Binary cross-entropy over both class probabilities, clamped away
    from the log singularities."""
    p = min(max(y_hat, 1e-12), 1.0 - 1e-12)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


@dataclass
class ForwardCache:
    word: WordStage | None
    hacn_word: WordStage | None
    han: HanForward | None
    hacn: HacnForward | None
    fused: np.ndarray
    dropped: np.ndarray
    drop_mask: np.ndarray | None
    keep_prob: float
    y_hat: float


def forward_user(user: UserRecord, assignment: ClusterAssignment,
                 params: ModelParams, mode: str = "eval",
                 dropout: float = 0.5, branch: str = "joint",
                 rng: np.random.Generator | int | None = None
                 ) -> Tuple[float, AttentionTrace, ForwardCache]:
    """Run both branches (or one, in an ablation mode), fuse, classify.

    Train mode applies inverted dropout to the fused vector using the
    supplied generator (or a seed); eval mode is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"mode must be train or eval, got {mode!r}")
    if isinstance(rng, int):
        rng = rng_stream(rng, "dropout")
    if branch not in BRANCHES:
        raise ConfigurationError(f"branch must be one of {BRANCHES}, got {branch!r}")
    dims = params.dims
    tokens = [t.tokens for t in user.tweets]
    shared = dims.share_word_level

    word = word_stage(tokens, params.word) if branch != "hacn" or shared else None
    han_fwd = None
    if branch in ("joint", "han"):
        han_fwd = han_encode(user, params.han_params(), word=word)
    hacn_fwd = None
    hacn_word = None
    if branch in ("joint", "hacn"):
        if shared:
            if word is None:
                word = word_stage(tokens, params.word)
            hacn_word = word
        else:
            hacn_word = word_stage(tokens, params.hacn_params().word)
        hacn_fwd = hacn_encode(user, assignment, params.hacn_params(), word=hacn_word)

    behaviour = hacn_fwd.behaviour if hacn_fwd is not None else np.zeros(dims.proj, DTYPE)
    user_vector = (han_fwd.user_vector if han_fwd is not None
                   else np.zeros(2 * dims.d_hidden, DTYPE))
    fused = fuse(behaviour, user_vector)
    drop_mask = None
    keep_prob = 1.0
    dropped = fused
    if mode == "train" and dropout > 0.0:
        if rng is None:
            raise ConfigurationError("train mode with dropout needs a generator")
        keep_prob = 1.0 - dropout
        drop_mask = rng.random(fused.shape[0]) < keep_prob
        dropped = fused * drop_mask / keep_prob
    y_hat = classify(dropped, params.fuse_w, params.fuse_b)
    trace = _build_trace(user, assignment, han_fwd, hacn_fwd)
    cache = ForwardCache(word=word, hacn_word=hacn_word, han=han_fwd,
                         hacn=hacn_fwd, fused=fused, dropped=dropped,
                         drop_mask=drop_mask, keep_prob=keep_prob, y_hat=y_hat)
    return y_hat, trace, cache


def _build_trace(user: UserRecord, assignment: ClusterAssignment,
                 han_fwd: HanForward | None,
                 hacn_fwd: HacnForward | None) -> AttentionTrace:
    n = len(user.tweets)
    if hacn_fwd is not None:
        within = [c.tweet_weights for c in hacn_fwd.clusters]
        members = [c.member_indices for c in hacn_fwd.clusters]
        cluster_weights = hacn_fwd.cluster_weights
        hacn_words = hacn_fwd.word_weights
        membership = assignment.labels.copy()
    else:
        # sequence-only ablation: report one flat pseudo-cluster
        within = [np.ones(n) / n]
        members = [np.arange(n)]
        cluster_weights = np.ones(1)
        membership = np.zeros(n, dtype=int)
        hacn_words = (han_fwd.word_weights if han_fwd is not None
                      else [np.ones(t.tokens.shape[0]) / t.tokens.shape[0]
                            for t in user.tweets])
    if han_fwd is not None:
        han_words = han_fwd.word_weights
        tweet_weights = han_fwd.tweet_weights
    else:
        han_words = hacn_words
        tweet_weights = np.ones(n) / n
    return AttentionTrace(
        han_word_weights=han_words,
        han_tweet_weights=tweet_weights,
        hacn_word_weights=hacn_words,
        within_cluster_weights=within,
        cluster_weights=cluster_weights,
        membership=membership,
        member_indices=members,
    )


def backward_user(cache: ForwardCache, y: int, params: ModelParams,
                  branch: str = "joint") -> Gradients:
    """Gradients of the clamped cross-entropy w.r.t. every registry tensor.

    Disabled-branch parameters come back as exact zeros so the optimizer
    keyset always matches the registry.
    """
    grads = Gradients()
    dims = params.dims
    d_p = dims.proj
    dlogit = cache.y_hat - float(y)
    grads.add("fuse.b", np.array([dlogit], dtype=DTYPE))
    grads.add("fuse.w", dlogit * cache.dropped)
    dfused = dlogit * params.fuse_w
    if cache.drop_mask is not None:
        dfused = dfused * cache.drop_mask / cache.keep_prob
    dbehaviour = dfused[:d_p]
    duser_vec = dfused[d_p:]

    dword_shared: np.ndarray | None = None
    if branch in ("joint", "han") and cache.han is not None:
        dtweet_vecs = han_backward(duser_vec, cache.han, params.han_params(), grads)
        dword_shared = dtweet_vecs
    if branch in ("joint", "hacn") and cache.hacn is not None:
        dtweet_vecs = hacn_backward(dbehaviour, cache.hacn, params.hacn_params(),
                                    grads, within_prefix="hacn_within",
                                    cluster_prefix="hacn_cluster",
                                    proj_prefix="hacn_proj")
        if dims.share_word_level:
            dword_shared = (dtweet_vecs if dword_shared is None
                            else dword_shared + dtweet_vecs)
        else:
            word_stage_backward(dtweet_vecs, cache.hacn_word,
                                params.hacn_params().word, grads, "hacn_word")
    if dword_shared is not None and cache.word is not None:
        word_stage_backward(dword_shared, cache.word, params.word, grads, "word")
    if branch == "han":
        grads["fuse.w"][:d_p] = 0.0
    elif branch == "hacn":
        grads["fuse.w"][d_p:] = 0.0
    return grads.fill_missing(params.registry())


def loss_and_grad_for_users(users: Sequence[UserRecord],
                            assignments: Dict[str, ClusterAssignment],
                            params: ModelParams, branch: str = "joint"
                            ) -> Tuple[float, Gradients]:
    """Eval-mode mean loss and gradients over a micro-batch, the quantity
    the finite-difference oracle checks."""
    registry = params.registry()
    total = Gradients()
    loss = 0.0
    for user in users:
        y_hat, _, cache = forward_user(user, assignments[user.user_id], params,
                                       mode="eval", branch=branch)
        loss += bce_loss(y_hat, user.label)
        for name, g in backward_user(cache, user.label, params, branch).items():
            total.add(name, g / len(users))
    return loss / len(users), total.fill_missing(registry)


@dataclass
class TrainConfig:
    """Training hyperparameters; model dims travel with the data's d_w."""

    lr: float = 0.001
    dropout: float = 0.5
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    d_hidden: int = 8
    d_att: int | None = None
    d_proj: int | None = None
    e_max: int = E_MAX_DEFAULT
    branch: str = "joint"
    share_word_level: bool = True
    early_stop_patience: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0.0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.branch not in BRANCHES:
            raise ConfigurationError(f"branch must be one of {BRANCHES}")

    def dims_for(self, d_w: int) -> ModelDims:
        return ModelDims(d_w=d_w, d_hidden=self.d_hidden, d_att=self.d_att,
                         d_proj=self.d_proj, share_word_level=self.share_word_level)


def train(dataset: Dataset, assignments: Dict[str, ClusterAssignment],
          config: TrainConfig,
          val_users: Sequence[UserRecord] | None = None
          ) -> Tuple[ModelParams, List[float]]:
    """Mini-batch Adam training, deterministic for a given seed.

    Returns the parameters and the per-epoch mean loss curve. When
    ``early_stop_patience`` is set and validation users are supplied,
    training stops after that many epochs without an F1 improvement and
    the best parameters are restored.
    """
    if not dataset.users:
        raise InputError("training set is empty")
    missing = [u.user_id for u in dataset.users if u.user_id not in assignments]
    if missing:
        raise InputError(f"no cluster assignment for users: {missing[:3]}")
    params = init_model_params(config.dims_for(dataset.d_w), config.seed,
                               branch=config.branch)
    registry = params.registry()
    adam = AdamState.for_params(registry, lr=config.lr)
    shuffle_rng = rng_stream(config.seed, "shuffle")
    curve: List[float] = []
    best: Tuple[float, Dict[str, np.ndarray]] | None = None
    stale = 0
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(dataset.users))
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, len(order), config.batch_size)):
            batch = order[start:start + config.batch_size]
            grads = Gradients()
            batch_loss = 0.0
            for pos, idx in enumerate(batch):
                user = dataset.users[int(idx)]
                drop_rng = rng_stream(config.seed, "dropout", epoch, batch_no, pos)
                y_hat, _, cache = forward_user(
                    user, assignments[user.user_id], params, mode="train",
                    dropout=config.dropout, branch=config.branch, rng=drop_rng)
                batch_loss += bce_loss(y_hat, user.label)
                for name, g in backward_user(cache, user.label, params,
                                             config.branch).items():
                    grads.add(name, g / len(batch))
            if not np.isfinite(batch_loss):
                raise NumericalError(
                    f"non-finite loss in epoch {epoch}, batch {batch_no}")
            adam_step(registry, grads.fill_missing(registry), adam)
            epoch_loss += batch_loss
        curve.append(epoch_loss / len(order))
        if config.early_stop_patience is not None and val_users:
            f1 = _validation_f1(val_users, assignments, params, config.branch)
            if best is None or f1 > best[0]:
                best = (f1, {k: v.copy() for k, v in registry.items()})
                stale = 0
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    break
    if best is not None:
        for name, arr in best[1].items():
            registry[name][...] = arr
    return params, curve


def _validation_f1(users: Sequence[UserRecord],
                   assignments: Dict[str, ClusterAssignment],
                   params: ModelParams, branch: str) -> float:
    from .metrics import confusion, prf1_accuracy

    preds = [predict_user(u, assignments[u.user_id], params, branch)[0]
             for u in users]
    labels = [u.label for u in users]
    return prf1_accuracy(confusion(preds, labels)).f1


def predict_user(user: UserRecord, assignment: ClusterAssignment,
                 params: ModelParams, branch: str = "joint"
                 ) -> Tuple[int, float, AttentionTrace]:
    """Deterministic eval-mode prediction: label, probability, trace."""
    y_hat, trace, _ = forward_user(user, assignment, params, mode="eval",
                                   branch=branch)
    return int(y_hat >= 0.5), y_hat, trace


def score_clustering_candidate(train_users: List[UserRecord],
                               val_users: List[UserRecord],
                               hdb_params: HdbscanParams, e_max: int,
                               seed: int, epochs: int = 2,
                               d_hidden: int = 6) -> float:
    """Validation F1 of a short training run under candidate clustering
    parameters; the objective for the clustering search."""
    from .metrics import confusion, prf1_accuracy

    users = list(train_users) + list(val_users)
    d_w = users[0].tweets[0].tokens.shape[1]
    pool = Dataset(users=users, d_w=d_w)
    assignments = assign_dataset(pool, "hdbscan", hdb_params, e_max=e_max, seed=seed)
    config = TrainConfig(epochs=epochs, d_hidden=d_hidden, dropout=0.0,
                         lr=0.005, seed=seed, e_max=e_max)
    params, _ = train(Dataset(users=list(train_users), d_w=d_w), assignments, config)
    preds = [predict_user(u, assignments[u.user_id], params)[0] for u in val_users]
    labels = [u.label for u in val_users]
    return prf1_accuracy(confusion(preds, labels)).f1


# ---------------------------------------------------------------------------
# Checkpoints


def config_hash(payload: dict) -> str:
    """Stable hash of a resolved configuration."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def save_checkpoint(params: ModelParams, path: str | Path,
                    cfg_hash: str = "") -> None:
    """Manifest JSON plus a little-endian float32 blob next to it."""
    path = Path(path)
    blob_path = path.with_suffix(path.suffix + ".bin")
    entries = []
    offset = 0
    chunks = []
    for name, arr in params.registry().items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += len(raw)
        chunks.append(raw)
    manifest = {
        "format": CKPT_FORMAT,
        "dims": params.dims.to_dict(),
        "config_hash": cfg_hash,
        "blob": blob_path.name,
        "params": entries,
    }
    path.write_text(json.dumps(manifest, sort_keys=True) + "\n", encoding="utf-8")
    blob_path.write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> Tuple[ModelParams, str]:
    """Load and shape-validate a checkpoint; returns (params, config_hash)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("format") != CKPT_FORMAT:
        raise DataError(f"unknown checkpoint format {manifest.get('format')!r}")
    dims_raw = manifest["dims"]
    dims = ModelDims(d_w=int(dims_raw["d_w"]), d_hidden=int(dims_raw["d_hidden"]),
                     d_att=int(dims_raw["d_att"]), d_proj=int(dims_raw["d_proj"]),
                     share_word_level=bool(dims_raw["share_word_level"]))
    params = init_model_params(dims, seed=0)
    registry = params.registry()
    blob = (path.parent / manifest["blob"]).read_bytes()
    seen = set()
    for entry in manifest["params"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if name not in registry:
            raise DataError(f"checkpoint parameter {name!r} not in model registry")
        target = registry[name]
        if target.shape != shape:
            raise DataError(
                f"checkpoint shape {shape} for {name!r} does not match "
                f"model shape {target.shape}")
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        target[...] = values.reshape(shape).astype(DTYPE)
        seen.add(name)
    if seen != set(registry):
        raise DataError("checkpoint does not cover the full parameter registry")
    return params, manifest.get("config_hash", "")


# ---------------------------------------------------------------------------
# Estimator wrapper


class NarrationDepClassifier(BaseEstimator, ClassifierMixin):
    """Joint clustering + two-branch attention classifier over user records.

    ``fit`` takes a sequence of user records (labels ride along on the
    records; pass ``y`` to override), clusters every user's tweets, and
    trains the fused model. ``predict``/``predict_proba`` cluster unseen
    users with the fitted parameters and run the model in eval mode.
    """

    def __init__(self, d_hidden: int = 8, d_att: int | None = None,
                 d_proj: int | None = None, epochs: int = 10, lr: float = 0.001,
                 dropout: float = 0.5, batch_size: int = 16, seed: int = 0,
                 e_max: int = E_MAX_DEFAULT, clusterer: str = "hdbscan",
                 min_cluster_size: int = 3, min_samples: int = 1,
                 metric: str = "euclidean", kmeans_k: int = 4,
                 tune_budget: int = 0, branch: str = "joint",
                 share_word_level: bool = True,
                 early_stop_patience: int | None = None):
        self.d_hidden = d_hidden
        self.d_att = d_att
        self.d_proj = d_proj
        self.epochs = epochs
        self.lr = lr
        self.dropout = dropout
        self.batch_size = batch_size
        self.seed = seed
        self.e_max = e_max
        self.clusterer = clusterer
        self.min_cluster_size = min_cluster_size
        self.min_samples = min_samples
        self.metric = metric
        self.kmeans_k = kmeans_k
        self.tune_budget = tune_budget
        self.branch = branch
        self.share_word_level = share_word_level
        self.early_stop_patience = early_stop_patience

    def _as_dataset(self, X) -> Dataset:
        if isinstance(X, Dataset):
            return X
        users = list(X)
        if not users:
            raise InputError("empty user collection")
        d_w = users[0].tweets[0].tokens.shape[1]
        return Dataset(users=users, d_w=d_w)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, dropout=self.dropout, epochs=self.epochs,
                           batch_size=self.batch_size, seed=self.seed,
                           d_hidden=self.d_hidden, d_att=self.d_att,
                           d_proj=self.d_proj, e_max=self.e_max,
                           branch=self.branch,
                           share_word_level=self.share_word_level,
                           early_stop_patience=self.early_stop_patience)

    def fit(self, X, y=None):
        dataset = self._as_dataset(X)
        if y is not None:
            labels = np.asarray(y, dtype=int)
            if labels.shape[0] != len(dataset.users):
                raise InputError("y length does not match the user count")
            dataset = Dataset(
                users=[replace_label(u, int(lab))
                       for u, lab in zip(dataset.users, labels)],
                d_w=dataset.d_w)
        hdb_params = HdbscanParams(self.min_cluster_size, self.min_samples,
                                   self.metric)
        if self.tune_budget > 0 and self.clusterer == "hdbscan":
            split_rng = rng_stream(self.seed, "tune-split")
            order = split_rng.permutation(len(dataset.users))
            n_val = max(1, len(order) // 5)
            val_idx = set(order[:n_val].tolist())
            train_users = [u for i, u in enumerate(dataset.users) if i not in val_idx]
            val_users = [u for i, u in enumerate(dataset.users) if i in val_idx]
            hdb_params = tune_clustering(train_users, val_users,
                                         self.tune_budget, self.seed,
                                         e_max=self.e_max)
        self.cluster_params_ = hdb_params
        assignments = assign_dataset(dataset, self.clusterer, hdb_params,
                                     kmeans_k=self.kmeans_k, e_max=self.e_max,
                                     seed=self.seed)
        self.params_, self.loss_curve_ = train(dataset, assignments,
                                               self._train_config())
        self.assignments_ = assignments
        self.classes_ = np.array([0, 1])
        return self

    def _assign(self, dataset: Dataset) -> Dict[str, ClusterAssignment]:
        return assign_dataset(dataset, self.clusterer, self.cluster_params_,
                              kmeans_k=self.kmeans_k, e_max=self.e_max,
                              seed=self.seed)

    def predict_proba(self, X) -> np.ndarray:
        dataset = self._as_dataset(X)
        assignments = self._assign(dataset)
        probs = np.array([
            predict_user(u, assignments[u.user_id], self.params_, self.branch)[1]
            for u in dataset.users])
        return np.column_stack([1.0 - probs, probs])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def trace(self, user: UserRecord) -> AttentionTrace:
        assignment = self._assign(Dataset(users=[user], d_w=None))[user.user_id]
        return predict_user(user, assignment, self.params_, self.branch)[2]


def replace_label(user: UserRecord, label: int) -> UserRecord:
    return UserRecord(user_id=user.user_id, label=label, tweets=user.tweets)
