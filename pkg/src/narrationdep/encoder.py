"""Sequence-encoding primitives shared by both model branches: a gated
recurrent cell, bidirectional encoding, and additive attention (projection,
context-vector scoring, masked softmax, weighted sum).

Every forward function has a matching explicit backward; gradients are
accumulated into a :class:`~narrationdep.numerics.Gradients` sink under a
caller-supplied name prefix, which is what lets the two branches share
word-level parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import DimensionError, EmptySupportError
from .numerics import DTYPE, Gradients, affine, masked_softmax, sigmoid, xavier_init


@dataclass
class GruParams:
    """Reset/update-gate recurrent cell parameters for one direction."""

    w_z: np.ndarray
    u_z: np.ndarray
    b_z: np.ndarray
    w_r: np.ndarray
    u_r: np.ndarray
    b_r: np.ndarray
    w_h: np.ndarray
    u_h: np.ndarray
    b_h: np.ndarray

    @property
    def d_hidden(self) -> int:
        return self.w_z.shape[0]

    @property
    def d_in(self) -> int:
        return self.w_z.shape[1]

    def named(self, prefix: str) -> List[Tuple[str, np.ndarray]]:
        return [(f"{prefix}.{name}", getattr(self, name))
                for name in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r",
                             "w_h", "u_h", "b_h")]


@dataclass
class AttentionParams:
    """Additive attention: score_i = u . tanh(w @ h_i + b)."""

    w: np.ndarray
    b: np.ndarray
    u: np.ndarray

    def named(self, prefix: str) -> List[Tuple[str, np.ndarray]]:
        return [(f"{prefix}.w", self.w), (f"{prefix}.b", self.b),
                (f"{prefix}.u", self.u)]


@dataclass
class LevelParams:
    """One hierarchy level: forward+backward recurrent cells plus attention."""

    gru_f: GruParams
    gru_b: GruParams
    att: AttentionParams

    def named(self, prefix: str) -> List[Tuple[str, np.ndarray]]:
        return (self.gru_f.named(f"{prefix}.gru_f")
                + self.gru_b.named(f"{prefix}.gru_b")
                + self.att.named(f"{prefix}.att"))


@dataclass
class EncodedSequence:
    """Bidirectional hidden states, one row per position; masked rows are zero."""

    states: np.ndarray
    mask: np.ndarray


def init_gru_params(d_in: int, d_hidden: int, rng: np.random.Generator) -> GruParams:
    def mat(rows, cols):
        return xavier_init((rows, cols), rng)

    return GruParams(
        w_z=mat(d_hidden, d_in), u_z=mat(d_hidden, d_hidden), b_z=np.zeros(d_hidden, DTYPE),
        w_r=mat(d_hidden, d_in), u_r=mat(d_hidden, d_hidden), b_r=np.zeros(d_hidden, DTYPE),
        w_h=mat(d_hidden, d_in), u_h=mat(d_hidden, d_hidden), b_h=np.zeros(d_hidden, DTYPE),
    )


def init_attention_params(d_in: int, d_att: int, rng: np.random.Generator) -> AttentionParams:
    return AttentionParams(
        w=xavier_init((d_att, d_in), rng),
        b=np.zeros(d_att, DTYPE),
        u=xavier_init((d_att,), rng),
    )


def init_level_params(d_in: int, d_hidden: int, d_att: int,
                      rng: np.random.Generator) -> LevelParams:
    return LevelParams(
        gru_f=init_gru_params(d_in, d_hidden, rng),
        gru_b=init_gru_params(d_in, d_hidden, rng),
        att=init_attention_params(2 * d_hidden, d_att, rng),
    )


# ---------------------------------------------------------------------------
# GRU cell


@dataclass
class GruStepCache:
    x: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    rh: np.ndarray
    h_tilde: np.ndarray


def gru_cell_forward(x: np.ndarray, h_prev: np.ndarray,
                     p: GruParams) -> Tuple[np.ndarray, GruStepCache]:
    """One gated update:

        z = sigma(w_z x + u_z h_prev + b_z)
        r = sigma(w_r x + u_r h_prev + b_r)
        h~ = tanh(w_h x + u_h (r * h_prev) + b_h)
        h = (1 - z) * h_prev + z * h~
    """
    if x.shape != (p.d_in,) or h_prev.shape != (p.d_hidden,):
        raise DimensionError(
            f"gru_cell expects x({p.d_in},), h({p.d_hidden},); "
            f"got x{x.shape}, h{h_prev.shape}")
    z = sigmoid(affine(x, p.w_z, p.b_z) + p.u_z @ h_prev)
    r = sigmoid(affine(x, p.w_r, p.b_r) + p.u_r @ h_prev)
    rh = r * h_prev
    h_tilde = np.tanh(affine(x, p.w_h, p.b_h) + p.u_h @ rh)
    h = (1.0 - z) * h_prev + z * h_tilde
    return h, GruStepCache(x=x, h_prev=h_prev, z=z, r=r, rh=rh, h_tilde=h_tilde)


def gru_cell(x: np.ndarray, h_prev: np.ndarray, p: GruParams) -> np.ndarray:
    return gru_cell_forward(x, h_prev, p)[0]


def gru_cell_backward(dh: np.ndarray, cache: GruStepCache, p: GruParams,
                      grads: Gradients, prefix: str) -> Tuple[np.ndarray, np.ndarray]:
    """Backprop one cell step; returns (dx, dh_prev)."""
    z, r, h_tilde, h_prev, x = cache.z, cache.r, cache.h_tilde, cache.h_prev, cache.x
    dz = dh * (h_tilde - h_prev)
    dh_tilde = dh * z
    dh_prev = dh * (1.0 - z)

    da_h = dh_tilde * (1.0 - h_tilde ** 2)
    grads.add(f"{prefix}.w_h", np.outer(da_h, x))
    grads.add(f"{prefix}.u_h", np.outer(da_h, cache.rh))
    grads.add(f"{prefix}.b_h", da_h)
    drh = p.u_h.T @ da_h
    dr = drh * h_prev
    dh_prev = dh_prev + drh * r

    da_r = dr * r * (1.0 - r)
    grads.add(f"{prefix}.w_r", np.outer(da_r, x))
    grads.add(f"{prefix}.u_r", np.outer(da_r, h_prev))
    grads.add(f"{prefix}.b_r", da_r)
    dh_prev = dh_prev + p.u_r.T @ da_r

    da_z = dz * z * (1.0 - z)
    grads.add(f"{prefix}.w_z", np.outer(da_z, x))
    grads.add(f"{prefix}.u_z", np.outer(da_z, h_prev))
    grads.add(f"{prefix}.b_z", da_z)
    dh_prev = dh_prev + p.u_z.T @ da_z

    dx = p.w_z.T @ da_z + p.w_r.T @ da_r + p.w_h.T @ da_h
    return dx, dh_prev


# ---------------------------------------------------------------------------
# Bidirectional encoding


@dataclass
class BiGruCache:
    fwd_steps: List[GruStepCache | None]
    bwd_steps: List[GruStepCache | None]
    mask: np.ndarray
    d_hidden: int


def bigru_forward(xs: np.ndarray, fwd: GruParams, bwd: GruParams,
                  mask: np.ndarray | None = None
                  ) -> Tuple[EncodedSequence, BiGruCache]:
    """Encode a sequence in both directions from zero initial states.

    Masked positions are skipped by the recurrence (state carried through)
    and produce all-zero output rows.
    """
    xs = np.asarray(xs, dtype=DTYPE)
    if xs.ndim != 2:
        raise DimensionError(f"bigru expects a (n, d_in) matrix, got {xs.shape}")
    n = xs.shape[0]
    if n == 0:
        raise EmptySupportError("cannot encode an empty sequence")
    if mask is None:
        mask = np.ones(n, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n,):
            raise DimensionError(f"mask shape {mask.shape} does not match length {n}")
    d_h = fwd.d_hidden
    states = np.zeros((n, 2 * d_h), dtype=DTYPE)
    fwd_steps: List[GruStepCache | None] = [None] * n
    h = np.zeros(d_h, dtype=DTYPE)
    for t in range(n):
        if mask[t]:
            h, fwd_steps[t] = gru_cell_forward(xs[t], h, fwd)
            states[t, :d_h] = h
    bwd_steps: List[GruStepCache | None] = [None] * n
    h = np.zeros(d_h, dtype=DTYPE)
    for t in range(n - 1, -1, -1):
        if mask[t]:
            h, bwd_steps[t] = gru_cell_forward(xs[t], h, bwd)
            states[t, d_h:] = h
    seq = EncodedSequence(states=states, mask=mask)
    return seq, BiGruCache(fwd_steps=fwd_steps, bwd_steps=bwd_steps, mask=mask, d_hidden=d_h)


def bigru_encode(xs: np.ndarray, fwd: GruParams, bwd: GruParams,
                 mask: np.ndarray | None = None) -> EncodedSequence:
    return bigru_forward(xs, fwd, bwd, mask)[0]


def bigru_backward(dstates: np.ndarray, cache: BiGruCache, fwd: GruParams,
                   bwd: GruParams, grads: Gradients, fwd_prefix: str,
                   bwd_prefix: str) -> np.ndarray:
    """Backprop through both directions; returns gradients for the inputs."""
    n = dstates.shape[0]
    d_h = cache.d_hidden
    dxs = np.zeros((n, fwd.d_in), dtype=DTYPE)
    dh = np.zeros(d_h, dtype=DTYPE)
    for t in range(n - 1, -1, -1):
        if cache.mask[t]:
            dx, dh = gru_cell_backward(dstates[t, :d_h] + dh, cache.fwd_steps[t],
                                       fwd, grads, fwd_prefix)
            dxs[t] += dx
    dh = np.zeros(d_h, dtype=DTYPE)
    for t in range(n):
        if cache.mask[t]:
            dx, dh = gru_cell_backward(dstates[t, d_h:] + dh, cache.bwd_steps[t],
                                       bwd, grads, bwd_prefix)
            dxs[t] += dx
    return dxs


# ---------------------------------------------------------------------------
# Additive attention


@dataclass
class AttendCache:
    states: np.ndarray
    mask: np.ndarray
    projected: np.ndarray
    weights: np.ndarray


def attend_forward(seq: EncodedSequence, p: AttentionParams
                   ) -> Tuple[np.ndarray, np.ndarray, AttendCache]:
    """Score each unmasked state, normalize, and return the weighted sum.

    Weights at masked positions are exactly zero; the unmasked weights form
    a probability vector, so the context lies in the convex hull of the
    unmasked states.
    """
    states, mask = seq.states, np.asarray(seq.mask, dtype=bool)
    if not mask.any():
        raise EmptySupportError("attention over an all-masked sequence")
    projected = np.tanh(states @ p.w.T + p.b[None, :])
    scores = projected @ p.u
    weights = masked_softmax(scores, mask)
    context = weights @ states
    return context, weights, AttendCache(states=states, mask=mask,
                                         projected=projected, weights=weights)


def attend(seq: EncodedSequence, p: AttentionParams) -> Tuple[np.ndarray, np.ndarray]:
    context, weights, _ = attend_forward(seq, p)
    return context, weights


def attend_backward(dcontext: np.ndarray, cache: AttendCache, p: AttentionParams,
                    grads: Gradients, prefix: str) -> np.ndarray:
    """Backprop the weighted sum and the softmax scoring; returns dstates."""
    states, weights, projected, mask = (cache.states, cache.weights,
                                        cache.projected, cache.mask)
    dstates = np.outer(weights, dcontext)
    dweights = states @ dcontext
    # softmax jacobian restricted to the unmasked support
    inner = float((weights * dweights).sum())
    dscores = weights * (dweights - inner)
    dscores[~mask] = 0.0
    grads.add(f"{prefix}.u", projected.T @ dscores)
    dprojected = np.outer(dscores, p.u)
    dpre = dprojected * (1.0 - projected ** 2)
    dpre[~mask] = 0.0
    grads.add(f"{prefix}.w", dpre.T @ states)
    grads.add(f"{prefix}.b", dpre.sum(axis=0))
    dstates += dpre @ p.w
    dstates[~mask] = 0.0
    return dstates


# ---------------------------------------------------------------------------
# Encode-and-attend: the composition both branches are built from


@dataclass
class EncodeAttendCache:
    bigru: BiGruCache
    attend: AttendCache


def encode_and_attend(xs: np.ndarray, level: LevelParams,
                      mask: np.ndarray | None = None
                      ) -> Tuple[np.ndarray, np.ndarray, EncodeAttendCache]:
    """Bidirectional encoding followed by additive attention pooling."""
    seq, gru_cache = bigru_forward(xs, level.gru_f, level.gru_b, mask)
    context, weights, att_cache = attend_forward(seq, level.att)
    return context, weights, EncodeAttendCache(bigru=gru_cache, attend=att_cache)


def encode_and_attend_backward(dcontext: np.ndarray, cache: EncodeAttendCache,
                               level: LevelParams, grads: Gradients,
                               prefix: str) -> np.ndarray:
    dstates = attend_backward(dcontext, cache.attend, level.att, grads, f"{prefix}.att")
    return bigru_backward(dstates, cache.bigru, level.gru_f, level.gru_b,
                          grads, f"{prefix}.gru_f", f"{prefix}.gru_b")


# ---------------------------------------------------------------------------
# Word stage: token matrices -> one vector per tweet


@dataclass
class WordStage:
    """Word-level encodings for every tweet of a user."""

    vectors: np.ndarray            # (n_tweets, 2 * d_hidden)
    word_weights: List[np.ndarray]  # per tweet, sums to 1
    caches: List[EncodeAttendCache]


def word_stage(token_seqs: List[np.ndarray], level: LevelParams) -> WordStage:
    vectors, weights, caches = [], [], []
    for tokens in token_seqs:
        vec, w, cache = encode_and_attend(tokens, level)
        vectors.append(vec)
        weights.append(w)
        caches.append(cache)
    return WordStage(vectors=np.stack(vectors), word_weights=weights, caches=caches)


def word_stage_backward(dvectors: np.ndarray, stage: WordStage,
                        level: LevelParams, grads: Gradients, prefix: str) -> None:
    for dvec, cache in zip(dvectors, stage.caches):
        encode_and_attend_backward(dvec, cache, level, grads, prefix)
