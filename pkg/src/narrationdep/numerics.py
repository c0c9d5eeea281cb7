"""Low-level numerical kernels: dense affine maps, stable activations,
masked softmax, parameter initialization, Adam updates, and a
finite-difference gradient checker.

Everything operates on float64 numpy arrays. All randomness in the package
flows through :func:`rng_stream`, which derives an independent PCG64
generator from a single top-level seed plus a tuple of stream keys, so
repeated runs with the same seed are bit-identical.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Tuple

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    EmptySupportError,
    NumericalError,
)

DTYPE = np.float64


def rng_stream(seed: int, *keys: int | str) -> np.random.Generator:
    """Derive an independent generator from ``seed`` and a key path.

    String keys are folded to integers with crc32 so stream identities are
    stable across runs and platforms. Distinct key paths give statistically
    independent PCG64 streams.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            entropy.append(zlib.crc32(key.encode("utf-8")))
        else:
            entropy.append(int(key) & 0xFFFFFFFF)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_tensor(values, shape: Tuple[int, ...] | None = None) -> np.ndarray:
    """Coerce to a float64 array, optionally checking the shape."""
    arr = np.asarray(values, dtype=DTYPE)
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{what} contains non-finite values")
    return arr


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compute ``w @ x + b`` for a vector ``x``, matrix ``w`` and bias ``b``."""
    if w.ndim != 2 or x.ndim != 1 or b.ndim != 1:
        raise DimensionError(
            f"affine expects (m,n), (n,), (m,); got w{w.shape}, x{x.shape}, b{b.shape}"
        )
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise DimensionError(
            f"affine shapes do not conform: w{w.shape} vs x{x.shape}, b{b.shape}"
        )
    return w @ x + b


def sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=DTYPE))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out


def masked_softmax(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax over the positions where ``mask`` is true.

    Masked-out positions are exactly zero in the result; the kept positions
    use max-subtraction for stability and sum to one.
    """
    logits = as_tensor(logits)
    if logits.ndim != 1:
        raise DimensionError(f"masked_softmax expects a vector, got shape {logits.shape}")
    if mask is None:
        mask = np.ones(logits.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != logits.shape:
            raise DimensionError(
                f"mask shape {mask.shape} does not match logits shape {logits.shape}"
            )
    if not mask.any():
        raise EmptySupportError("masked_softmax over an all-false mask")
    out = np.zeros_like(logits)
    kept = logits[mask]
    shifted = np.exp(kept - kept.max())
    out[mask] = shifted / shifted.sum()
    return out


class Gradients(dict):
    """Mapping from parameter name to gradient array.

    ``add`` accumulates, creating a zero array on first touch, which lets
    backward passes contribute to shared parameters from several sites.
    """

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self:
            self[name] += value
        else:
            self[name] = np.array(value, dtype=DTYPE, copy=True)

    def fill_missing(self, params: Dict[str, np.ndarray]) -> "Gradients":
        for name, arr in params.items():
            if name not in self:
                self[name] = np.zeros_like(arr)
        return self


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Dict[str, np.ndarray], lr: float = 0.001,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        state.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        state.v = {name: np.zeros_like(arr) for name, arr in params.items()}
        return state


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Apply one bias-corrected Adam update in place.

    Parameter arrays are mutated (so references held elsewhere stay valid)
    and the same dict/state pair is returned.
    """
    if set(params.keys()) != set(grads.keys()):
        missing = set(params) ^ set(grads)
        raise ConfigurationError(f"parameter/gradient keysets differ: {sorted(missing)}")
    if set(params.keys()) != set(state.m.keys()):
        raise ConfigurationError("Adam state does not cover the parameter keyset")
    state.t += 1
    b1t = 1.0 - state.beta1 ** state.t
    b2t = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ConfigurationError(
                f"gradient shape {g.shape} does not match parameter {name} {p.shape}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.eps)
    return params, state


def xavier_init(shape: Iterable[int], seed: int | np.random.Generator) -> np.ndarray:
    """Uniform initialization in +-sqrt(6 / (fan_in + fan_out)).

    For matrices ``(out, in)`` the fans are the two dims; a 1-D shape is
    treated as a projection onto a scalar (fan_out = 1). Deterministic for
    a given seed.
    """
    shape = tuple(int(s) for s in shape)
    if not shape or any(s <= 0 for s in shape):
        raise ConfigurationError(f"invalid shape for initialization: {shape}")
    if len(shape) == 1:
        fan_in, fan_out = shape[0], 1
    else:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    rng = seed if isinstance(seed, np.random.Generator) else rng_stream(seed, "xavier")
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


def finite_diff_check(
    loss_and_grad: Callable[[Dict[str, np.ndarray]], Tuple[float, Dict[str, np.ndarray]]],
    params: Dict[str, np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """Compare analytic gradients against central differences.

    ``loss_and_grad`` must be deterministic and return the scalar loss plus
    a gradient dict covering every parameter. Returns the max over all
    coordinates of ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)``.
    """
    loss0, analytic = loss_and_grad(params)
    if not np.isfinite(loss0):
        raise NumericalError("loss is non-finite at the evaluation point")
    worst = 0.0
    for name, p in params.items():
        grad = analytic[name]
        flat = p.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            lp, _ = loss_and_grad(params)
            flat[i] = orig - epsilon
            lm, _ = loss_and_grad(params)
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericalError(f"perturbed loss is non-finite at {name}[{i}]")
            numeric = (lp - lm) / (2.0 * epsilon)
            denom = max(1e-8, abs(gflat[i]) + abs(numeric))
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
