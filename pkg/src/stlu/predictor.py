"""Stochastic regularisation masks and Monte-Carlo flowpipe prediction.

The stand-in predictor is a linear autoregressive model.  Its weight vector
is one row of a ``1 x order`` weight matrix; a mask drawn from a schema
multiplies it element-wise before each stochastic rollout, and ``N``
rollouts are summarised as a per-step Gaussian flowpipe.

``p`` is the *keep* probability throughout: Bernoulli masks keep a weight
with probability ``p`` and Gaussian masks have mean 1 and variance
``(1 - p) / p``, the variance of a rescaled Bernoulli(p) keep mask.  Kept
Bernoulli weights are not rescaled by ``1 / p``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Flowpipe, Trace, flowpipe_from_samples
from .errors import ParameterError

__all__ = [
    "SRT", "Schema", "ToyARModel", "stream_rng", "sample_mask", "mc_predict", "fit_ar",
    "ar_generator",
]

log = logging.getLogger(__name__)


class SRT(enum.Enum):
    """Stochastic regularisation technique."""

    BERNOULLI_DROPOUT = "bernoulli_dropout"
    BERNOULLI_DROPCONNECT = "bernoulli_dropconnect"
    GAUSSIAN_DROPOUT = "gaussian_dropout"
    GAUSSIAN_DROPCONNECT = "gaussian_dropconnect"

    @property
    def per_row(self) -> bool:
        return self in (SRT.BERNOULLI_DROPOUT, SRT.GAUSSIAN_DROPOUT)

    @property
    def gaussian(self) -> bool:
        return self in (SRT.GAUSSIAN_DROPOUT, SRT.GAUSSIAN_DROPCONNECT)

    @classmethod
    def parse(cls, text: str) -> "SRT":
        key = text.strip().lower().replace("-", "_")
        aliases = {"b_dropout": "bernoulli_dropout", "b_dropconnect": "bernoulli_dropconnect",
                   "g_dropout": "gaussian_dropout", "g_dropconnect": "gaussian_dropconnect"}
        key = aliases.get(key, key)
        for member in cls:
            if member.value == key:
                return member
        raise ParameterError(f"unknown SRT {text!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class Schema:
    srt: SRT
    p: float

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ParameterError(f"keep probability p must lie in (0, 1], got {self.p!r}")

    def __str__(self):
        return f"{self.srt.value}(p={self.p:g})"


@dataclass(frozen=True)
class ToyARModel:
    """``y[t] = bias + sum_j weights[j] * y[t - 1 - j]``; ``weights[0]`` is lag 1."""

    order: int
    weights: tuple[float, ...]
    bias: float = 0.0
    ridge: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.order < 1 or len(self.weights) != self.order:
            raise ParameterError(f"need order >= 1 and {self.order} weights, got {len(self.weights)}")
        if not all(math.isfinite(w) for w in self.weights + (self.bias,)):
            raise ParameterError("model coefficients must be finite")

    def to_dict(self) -> dict:
        return {"order": self.order, "weights": list(self.weights), "bias": self.bias}

    @classmethod
    def from_dict(cls, data) -> "ToyARModel":
        try:
            return cls(int(data["order"]), tuple(data["weights"]), float(data.get("bias", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed model description: {exc}") from exc

    def rollout(self, history, horizon: int, masks=None) -> np.ndarray:
        """Deterministic (or masked) autoregressive forecast.

        ``masks`` broadcasts against ``(N, H, order)``; without masks the
        result has shape ``(H,)``.
        """
        hist = np.asarray(history, dtype=float)
        if hist.shape[-1] < self.order:
            raise ParameterError(f"history of length {hist.shape[-1]} shorter than order {self.order}")
        w = np.asarray(self.weights)
        if masks is None:
            lags = list(hist[-self.order:][::-1])
            out = np.empty(horizon)
            for h in range(horizon):
                y = self.bias + float(np.dot(w, lags))
                out[h] = y
                lags = [y] + lags[:-1]
            return out
        masks = np.asarray(masks, dtype=float)
        n = masks.shape[0]
        lags = np.tile(hist[-self.order:][::-1], (n, 1))
        out = np.empty((n, horizon))
        for h in range(horizon):
            y = self.bias + np.einsum("nk,nk->n", masks[:, h] * w, lags)
            out[:, h] = y
            lags = np.concatenate([y[:, None], lags[:, :-1]], axis=1)
        return out


def stream_rng(seed: int, *index: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *index)``; portable and reproducible."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=index)))


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_mask(schema: Schema, rows: int, cols: int, rng=None) -> np.ndarray:
    """Draw a ``rows x cols`` mask for ``schema``.

    Dropout variants draw one value per row and broadcast it across the row;
    dropConnect variants draw every entry independently.  Gaussian values
    are not clamped and may be negative.
    """
    if rows < 1 or cols < 1:
        raise ParameterError(f"mask shape must be positive, got {rows} x {cols}")
    rng = _as_rng(rng)
    shape = (rows, 1) if schema.srt.per_row else (rows, cols)
    if schema.srt.gaussian:
        draw = rng.normal(1.0, math.sqrt((1.0 - schema.p) / schema.p), size=shape)
    else:
        draw = (rng.random(size=shape) < schema.p).astype(float)
    return np.broadcast_to(draw, (rows, cols)).copy()


def mc_predict(model: ToyARModel, history, horizon: int, schema: Schema, n_samples: int,
               seed: int = 0, *, var: str = "x", start: int = 0,
               resample_per_step: bool = False, stream: tuple[int, ...] = ()) -> Flowpipe:
    """Monte-Carlo flowpipe from ``n_samples`` masked rollouts.

    Sample ``i`` draws its mask from its own stream ``(seed, *stream, i)``, so
    results do not depend on evaluation order.  By default one mask is held for the
    whole rollout; ``resample_per_step`` draws a fresh mask at every step.
    """
    if n_samples < 2:
        raise ParameterError(f"need at least 2 Monte-Carlo samples, got {n_samples}")
    if horizon < 1:
        raise ParameterError(f"horizon must be >= 1, got {horizon}")
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 1 or hist.size < model.order:
        raise ParameterError(f"history of length {hist.size} shorter than order {model.order}")
    steps = horizon if resample_per_step else 1
    masks = np.empty((n_samples, steps, model.order))
    for i in range(n_samples):
        rng = stream_rng(seed, *stream, i)
        for h in range(steps):
            masks[i, h] = sample_mask(schema, 1, model.order, rng)[0]
    if not resample_per_step:
        masks = np.broadcast_to(masks, (n_samples, horizon, model.order))
    rows = model.rollout(hist, horizon, masks)
    return flowpipe_from_samples({var: rows}, start=start)


def fit_ar(history, order: int) -> ToyARModel:
    """Least-squares AR(order) fit with intercept on one-step-ahead errors.

    Singular normal equations fall back to ridge with ``lambda = 1e-8``;
    the returned model then has ``ridge=True`` and a warning is logged.
    """
    y = np.asarray(history, dtype=float)
    if order < 1:
        raise ParameterError(f"order must be >= 1, got {order}")
    if y.ndim != 1 or y.size <= order + 1:
        raise ParameterError(f"need more than {order + 1} history points, got {y.size}")
    rows = y.size - order
    X = np.empty((rows, order + 1))
    for j in range(order):
        X[:, j] = y[order - 1 - j: y.size - 1 - j]
    X[:, order] = 1.0
    target = y[order:]
    gram = X.T @ X
    rhs = X.T @ target
    ridge = False
    try:
        if np.linalg.cond(gram) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned normal equations")
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        ridge = True
        log.warning("singular normal equations in AR(%d) fit; using ridge lambda=1e-8", order)
        beta = np.linalg.solve(gram + 1e-8 * np.eye(order + 1), rhs)
    return ToyARModel(order, tuple(beta[:order]), float(beta[order]), ridge=ridge)


def ar_generator(srt: SRT, n_samples: int, seed: int = 0, *, order: int = 2,
                 model: ToyARModel | None = None, var: str = "x",
                 resample_per_step: bool = False):
    """Reference flowpipe generator ``(history, horizon, p) -> Flowpipe``.

    Fits an AR model to each history unless a fixed ``model`` is given.
    The flowpipe starts at timestamp 0.
    """

    def generate(history, horizon, p):
        values = history.values(var) if isinstance(history, Trace) else np.asarray(history, dtype=float)
        m = model if model is not None else fit_ar(values, order)
        return mc_predict(m, values, horizon, Schema(srt, p), n_samples, seed, var=var,
                          resample_per_step=resample_per_step)

    generate.srt = srt
    return generate
