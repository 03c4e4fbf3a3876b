"""Flowpipes, traces and Gaussian confidence intervals.

A flowpipe holds, for every variable, a Gaussian ``N(mean, std**2)`` at each
integer time step, estimated from ``sample_count`` Monte-Carlo samples.  The
confidence interval at level ``eps`` is centred on the mean with half-width
``delta(eps) * std / sqrt(sample_count)``, where ``delta`` is the two-sided
standard-normal quantile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from .errors import ParameterError, ShapeError

__all__ = [
    "GaussianPoint",
    "ConfidenceInterval",
    "Flowpipe",
    "Trace",
    "quantile",
    "coverage",
    "confidence_interval",
    "flowpipe_from_samples",
    "trace_in_flowpipe",
    "coverage_level",
    "validate_flowpipe",
]


def _check_eps(eps):
    if not (isinstance(eps, (int, float, np.floating)) and 0.0 < eps < 1.0):
        raise ParameterError(f"confidence level must lie in (0, 1), got {eps!r}")


@lru_cache(maxsize=4096)
def _quantile(eps):
    return math.sqrt(2.0) * float(special.erfinv(eps))


def quantile(eps: float) -> float:
    """Half-width multiplier ``delta`` with ``P(|Z| <= delta) = eps``."""
    _check_eps(eps)
    return _quantile(float(eps))


def coverage(z):
    """Inverse of :func:`quantile`: ``P(|Z| <= z)`` for ``z >= 0``.

    Works on scalars and arrays.  ``erf(z / sqrt 2)`` is used instead of
    ``2 F(z) - 1`` to keep precision for small ``z``.
    """
    return special.erf(np.asarray(z, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class GaussianPoint:
    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ParameterError(f"non-finite Gaussian point {self}")
        if self.std < 0:
            raise ParameterError(f"negative std {self.std}")


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float

    def __contains__(self, value):
        return self.lo <= value <= self.hi

    @property
    def width(self):
        return self.hi - self.lo


def confidence_interval(point: GaussianPoint, n_samples: int, eps: float) -> ConfidenceInterval:
    """Interval ``[mean - delta*s, mean + delta*s]`` with ``s = std/sqrt(n)``."""
    _check_eps(eps)
    if not isinstance(n_samples, (int, np.integer)) or n_samples < 1:
        raise ParameterError(f"n_samples must be a positive integer, got {n_samples!r}")
    if not isinstance(point, GaussianPoint):
        point = GaussianPoint(*point)
    half = _quantile(float(eps)) * (point.std / math.sqrt(n_samples))
    return ConfidenceInterval(point.mean - half, point.mean + half)


def _frozen(values, name):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"variable {name!r} must be one-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class _Signal:
    """Shared time-domain bookkeeping for flowpipes and traces."""

    start: int
    length: int

    @property
    def times(self) -> range:
        return range(self.start, self.start + self.length)

    @property
    def end(self) -> int:
        """Last timestamp (inclusive)."""
        return self.start + self.length - 1

    def index(self, t: int) -> int:
        i = t - self.start
        if not 0 <= i < self.length:
            raise ShapeError(f"time {t} outside domain [{self.start}, {self.end}]")
        return i

    def _same_domain(self, other):
        if set(self.variables) != set(other.variables):
            raise ShapeError(
                f"variable mismatch: {sorted(self.variables)} vs {sorted(other.variables)}"
            )
        if self.start != other.start or self.length != other.length:
            raise ShapeError(
                f"time domain mismatch: [{self.start}, {self.end}] vs [{other.start}, {other.end}]"
            )


class Flowpipe(_Signal):
    """Per-variable sequences of Gaussians over a contiguous integer domain.

    Parameters
    ----------
    means, stds : mapping of variable name to 1-D array
        Same keys, all arrays of equal length.
    sample_count : int
        Number of Monte-Carlo samples the Gaussians were estimated from.
    start : int
        Timestamp of the first element.
    """

    __slots__ = ("_means", "_stds", "sample_count", "start", "length", "_scale")

    def __init__(self, means: Mapping[str, Sequence[float]], stds: Mapping[str, Sequence[float]],
                 sample_count: int = 1, start: int = 0):
        means = {k: _frozen(v, k) for k, v in means.items()}
        stds = {k: _frozen(v, k) for k, v in stds.items()}
        raw = {
            k: [(start + i, m, s) for i, (m, s) in enumerate(zip(means[k], stds.get(k, ())))]
            for k in means
        }
        problems = _violations(raw, sample_count)
        if set(means) != set(stds):
            problems.append(f"domain mismatch: mean variables {sorted(means)} vs std variables {sorted(stds)}")
        else:
            for k in means:
                if len(means[k]) != len(stds[k]):
                    problems.append(f"domain mismatch: variable {k!r} has {len(means[k])} means and {len(stds[k])} stds")
        if problems:
            raise ShapeError("invalid flowpipe: " + "; ".join(problems))
        self._means = means
        self._stds = stds
        self.sample_count = int(sample_count)
        self.start = int(start)
        self.length = len(next(iter(means.values())))
        self._scale = 1.0 / math.sqrt(self.sample_count)

    @classmethod
    def from_points(cls, variables: Mapping[str, Iterable[tuple[int, GaussianPoint]]],
                    sample_count: int = 1) -> "Flowpipe":
        problems = validate_flowpipe({"sample_count": sample_count, "variables": {
            k: [{"t": t, "mean": p.mean, "std": p.std} for t, p in v] for k, v in
            ((k, list(v)) for k, v in variables.items())}})
        if problems:
            raise ShapeError("invalid flowpipe: " + "; ".join(problems))
        variables = {k: list(v) for k, v in variables.items()}
        start = next(iter(variables.values()))[0][0]
        return cls({k: [p.mean for _, p in v] for k, v in variables.items()},
                   {k: [p.std for _, p in v] for k, v in variables.items()},
                   sample_count, start)

    @classmethod
    def from_trace(cls, trace: "Trace") -> "Flowpipe":
        """Zero-variance embedding: every confidence interval is a point."""
        return cls({k: trace.values(k) for k in trace.variables},
                   {k: np.zeros(trace.length) for k in trace.variables}, 1, trace.start)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Flowpipe":
        """Build from the JSON layout ``{"sample_count": N, "variables": {...}}``."""
        problems = validate_flowpipe(data)
        if problems:
            raise ShapeError("invalid flowpipe: " + "; ".join(problems))
        variables = data["variables"]
        start = next(iter(variables.values()))[0]["t"]
        return cls({k: [p["mean"] for p in v] for k, v in variables.items()},
                   {k: [p["std"] for p in v] for k, v in variables.items()},
                   data["sample_count"], start)

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "variables": {
                k: [{"t": self.start + i, "mean": float(m), "std": float(s)}
                    for i, (m, s) in enumerate(zip(self._means[k], self._stds[k]))]
                for k in self._means
            },
        }

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self._means)

    def mean(self, var: str) -> np.ndarray:
        return self._means[var]

    def std(self, var: str) -> np.ndarray:
        return self._stds[var]

    def effective_std(self, var: str) -> np.ndarray:
        """``std / sqrt(sample_count)``, the spread used by all interval math."""
        return self._stds[var] * self._scale

    def point(self, var: str, t: int) -> GaussianPoint:
        i = self.index(t)
        return GaussianPoint(float(self._means[var][i]), float(self._stds[var][i]))

    def interval(self, var: str, t: int, eps: float) -> ConfidenceInterval:
        return confidence_interval(self.point(var, t), self.sample_count, eps)

    def __eq__(self, other):
        if not isinstance(other, Flowpipe):
            return NotImplemented
        return (self.sample_count == other.sample_count and self.start == other.start
                and self.variables == other.variables
                and all(np.array_equal(self._means[k], other._means[k])
                        and np.array_equal(self._stds[k], other._stds[k]) for k in self._means))

    def __repr__(self):
        return (f"Flowpipe(variables={list(self.variables)}, times=[{self.start}, {self.end}], "
                f"sample_count={self.sample_count})")


class Trace(_Signal):
    """Deterministic per-variable values over a contiguous integer domain."""

    __slots__ = ("_values", "start", "length")

    def __init__(self, values: Mapping[str, Sequence[float]], start: int = 0):
        if not values:
            raise ShapeError("trace has no variables")
        vals = {k: _frozen(v, k) for k, v in values.items()}
        lengths = {len(v) for v in vals.values()}
        if len(lengths) != 1:
            raise ShapeError(f"domain mismatch: variable lengths {sorted(lengths)}")
        if 0 in lengths:
            raise ShapeError("trace is empty")
        for k, v in vals.items():
            if not np.all(np.isfinite(v)):
                raise ShapeError(f"variable {k!r} has non-finite values")
        self._values = vals
        self.start = int(start)
        self.length = lengths.pop()

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self._values)

    def values(self, var: str) -> np.ndarray:
        return self._values[var]

    def value(self, var: str, t: int) -> float:
        return float(self._values[var][self.index(t)])

    def window(self, start: int, stop: int, *, rebase: bool = False) -> "Trace":
        """Sub-trace covering timestamps ``start .. stop - 1``."""
        i, j = start - self.start, stop - self.start
        if i < 0 or j > self.length or i >= j:
            raise ShapeError(f"window [{start}, {stop}) outside domain [{self.start}, {self.end}]")
        return Trace({k: v[i:j] for k, v in self._values.items()}, 0 if rebase else start)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.start == other.start and self.variables == other.variables
                and all(np.array_equal(self._values[k], other._values[k]) for k in self._values))

    def __repr__(self):
        return f"Trace(variables={list(self.variables)}, times=[{self.start}, {self.end}])"


def flowpipe_from_samples(samples, start: int = 0) -> Flowpipe:
    """Fit a Gaussian per time step to Monte-Carlo sample rows.

    ``samples`` maps each variable to an ``N x T`` matrix (a bare matrix is
    taken as variable ``"x"``).  Means are sample means and stds use the
    unbiased ``N - 1`` divisor.
    """
    if not isinstance(samples, Mapping):
        samples = {"x": samples}
    means, stds, counts = {}, {}, set()
    for name, rows in samples.items():
        try:
            mat = np.asarray(rows, dtype=float)
        except ValueError as exc:
            raise ShapeError(f"ragged sample rows for {name!r}") from exc
        if mat.ndim != 2:
            raise ShapeError(f"samples for {name!r} must be an N x T matrix, got shape {mat.shape}")
        if mat.shape[0] < 2:
            raise ParameterError(f"need at least 2 samples per time step, got {mat.shape[0]}")
        means[name] = mat.mean(axis=0)
        stds[name] = mat.std(axis=0, ddof=1)
        counts.add(mat.shape[0])
    if len(counts) != 1:
        raise ShapeError(f"variables have different sample counts {sorted(counts)}")
    return Flowpipe(means, stds, counts.pop(), start)


def _covered(trace: Trace, fp: Flowpipe, eps: float) -> bool:
    delta = _quantile(eps)
    for var in fp.variables:
        half = delta * fp.effective_std(var)
        if np.any(np.abs(trace.values(var) - fp.mean(var)) > half):
            return False
    return True


def trace_in_flowpipe(trace: Trace, fp: Flowpipe, eps: float) -> bool:
    """True iff every trace value lies in its closed confidence interval."""
    _check_eps(eps)
    fp._same_domain(trace)
    return _covered(trace, fp, float(eps))


def coverage_level(trace: Trace, fp: Flowpipe) -> float:
    """Smallest confidence level whose intervals contain the whole trace.

    Pointwise the covering level is ``erf(|y - mean| / (s sqrt 2))``; the
    result is the maximum over variables and time, nudged by a few ulps so
    that ``trace_in_flowpipe(trace, fp, eps)`` holds exactly when
    ``eps >= coverage_level(trace, fp)``.  A point with zero spread and
    ``y != mean`` can never be covered and yields 1.
    """
    fp._same_domain(trace)
    level = 0.0
    for var in fp.variables:
        dev = np.abs(trace.values(var) - fp.mean(var))
        s = fp.effective_std(var)
        zero = s == 0
        if np.any(dev[zero] > 0):
            return 1.0
        if np.any(~zero):
            level = max(level, float(np.max(coverage(dev[~zero] / s[~zero]))))
    if level == 0.0:
        return 0.0
    # erf and erfinv do not round-trip exactly; walk to the float where containment flips
    for _ in range(_SNAP_STEPS):
        if level >= 1.0 or _covered(trace, fp, level):
            break
        level = float(np.nextafter(level, 2.0))
    for _ in range(_SNAP_STEPS):
        below = float(np.nextafter(level, 0.0))
        if below <= 0.0 or not _covered(trace, fp, below):
            break
        level = below
    return level


_SNAP_STEPS = 1024


def _violations(raw, sample_count):
    problems = []
    if not isinstance(sample_count, (int, np.integer)) or isinstance(sample_count, bool) or sample_count < 1:
        problems.append(f"sample_count must be an integer >= 1, got {sample_count!r}")
    if not raw:
        problems.append("flowpipe has no variables")
        return problems
    domains = {}
    for name, points in raw.items():
        if len(points) == 0:
            problems.append(f"variable {name!r} is empty")
            continue
        times = [p[0] for p in points]
        if any(not isinstance(t, (int, np.integer)) or isinstance(t, bool) for t in times):
            problems.append(f"variable {name!r} has non-integer timestamps")
        else:
            for a, b in zip(times, times[1:]):
                if b <= a:
                    problems.append(f"non-monotone time in {name!r}: {a} then {b}")
                    break
                if b != a + 1:
                    problems.append(f"non-contiguous time in {name!r}: {a} then {b}")
                    break
        for t, m, s in points:
            if not (math.isfinite(m) and math.isfinite(s)):
                problems.append(f"non-finite value in {name!r} at t={t}")
            elif s < 0:
                problems.append(f"negative std in {name!r} at t={t}: {s}")
        domains[name] = (times[0], len(times))
    if len(set(domains.values())) > 1:
        problems.append("domain mismatch: " + ", ".join(
            f"{k}: start {s} length {n}" for k, (s, n) in domains.items()))
    return problems


def validate_flowpipe(fp) -> list[str]:
    """Return every invariant violation of ``fp``; empty iff it is valid.

    Accepts a :class:`Flowpipe` or the JSON layout
    ``{"sample_count": N, "variables": {name: [{"t", "mean", "std"}, ...]}}``.
    Never raises on malformed content, only reports it.
    """
    if isinstance(fp, Flowpipe):
        fp = fp.to_dict()
    if not isinstance(fp, Mapping):
        return [f"expected a mapping, got {type(fp).__name__}"]
    variables = fp.get("variables")
    if not isinstance(variables, Mapping):
        return ["missing or malformed 'variables' mapping"]
    raw, problems = {}, []
    for name, points in variables.items():
        if not isinstance(points, Sequence):
            problems.append(f"variable {name!r} is not a list of points")
            continue
        rows = []
        for p in points:
            try:
                rows.append((p["t"], float(p["mean"]), float(p["std"])))
            except (KeyError, TypeError, ValueError):
                problems.append(f"malformed point in {name!r}: {p!r}")
        raw[name] = rows
    return problems + _violations(raw, fp.get("sample_count"))
