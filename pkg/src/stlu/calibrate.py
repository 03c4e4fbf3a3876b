"""STL-U calibration losses, evaluation metrics and schema selection.

Both losses compare a predicted flowpipe with the target trace it should
have covered.  ``loss_sat`` works at a fixed confidence level from three
agreement indicators; ``loss_cf`` needs no level and works from the
guarantee-range bounds.  Either can rank candidate SRT schemas.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .confidence import strong_range, weak_range
from .core import Flowpipe, Trace, coverage_level, trace_in_flowpipe
from .errors import ParameterError, STLUError
from .formula.nodes import Formula
from .monitor import trace_sat, verdict
from .predictor import SRT

__all__ = [
    "CalibrationWeights", "SAT_WEIGHTS", "CF_WEIGHTS", "LabeledPair", "Sample",
    "indicators_sat", "loss_sat", "g_components", "loss_cf", "average_loss",
    "PairFailure", "SelectionResult", "select_schema", "EvalMetrics", "eval_metrics",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationWeights:
    beta1: float
    beta2: float

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1 and self.beta1 + self.beta2 < 1):
            raise ParameterError(
                f"weights need beta1, beta2 in (0, 1) with beta1 + beta2 < 1, got {self.beta1}, {self.beta2}")

    @property
    def beta3(self) -> float:
        return 1.0 - self.beta1 - self.beta2

    def combine(self, a, b, c) -> float:
        return 1.0 - (self.beta1 * a + self.beta2 * b + self.beta3 * c)


SAT_WEIGHTS = CalibrationWeights(0.2, 0.2)
CF_WEIGHTS = CalibrationWeights(0.3, 0.3)


@dataclass(frozen=True)
class LabeledPair:
    """A predicted flowpipe and the target trace it should describe."""

    flowpipe: Flowpipe
    target: Trace

    def __post_init__(self):
        self.flowpipe._same_domain(self.target)


@dataclass(frozen=True)
class Sample:
    """History window plus the target that follows it; input to schema selection."""

    history: Trace
    target: Trace
    name: str = ""


def indicators_sat(pair: LabeledPair, phi: Formula, eps: float) -> tuple[int, int, int]:
    """``(h_s, h_w, h_b)`` at confidence level ``eps`` and time 0.

    ``h_s`` (``h_w``) is 1 when the strong (weak) verdict agrees with the
    target's boolean verdict, counting joint violation as agreement.
    ``h_b`` is 1 when the target lies inside the ``eps`` band.
    """
    t = pair.flowpipe.start
    truth = trace_sat(phi, pair.target, t)
    v = verdict(phi, pair.flowpipe, t, eps=eps)
    return (int(v.strong == truth), int(v.weak == truth),
            int(trace_in_flowpipe(pair.target, pair.flowpipe, eps)))


def loss_sat(pair: LabeledPair, phi: Formula, eps: float,
             w: CalibrationWeights = SAT_WEIGHTS) -> float:
    return w.combine(*indicators_sat(pair, phi, eps))


def g_components(pair: LabeledPair, phi: Formula) -> tuple[float, float, float]:
    """``(g_s, g_w, g_b)`` from guarantee ranges at time 0.

    With ``s_up`` the supremum of the strong range (0 when empty) and
    ``w_lo`` the infimum of the weak range (1 when empty):
    ``g_s = s_up`` if the target satisfies ``phi`` else ``1 - s_up``;
    ``g_w = 1 - w_lo`` if it satisfies else ``w_lo``; ``g_b`` is the
    smallest level whose band contains the target.
    """
    t = pair.flowpipe.start
    truth = trace_sat(phi, pair.target, t)
    s_up = strong_range(phi, pair.flowpipe, t).sup()
    w_lo = weak_range(phi, pair.flowpipe, t).inf()
    g_s = s_up if truth else 1.0 - s_up
    g_w = 1.0 - w_lo if truth else w_lo
    return g_s, g_w, coverage_level(pair.target, pair.flowpipe)


def loss_cf(pair: LabeledPair, phi: Formula, w: CalibrationWeights = CF_WEIGHTS) -> float:
    return w.combine(*g_components(pair, phi))


@dataclass(frozen=True)
class PairFailure:
    index: int
    name: str
    error: str


class DatasetError(STLUError):
    """One or more pairs failed; ``failures`` lists them."""

    def __init__(self, failures):
        self.failures = failures
        lines = "; ".join(f"pair {f.index} {f.name}: {f.error}".replace("  ", " ") for f in failures)
        super().__init__(f"{len(failures)} pair(s) failed: {lines}")


def _criterion(criterion, phi, eps, w):
    if criterion == "sat":
        if eps is None:
            raise ParameterError("criterion 'sat' needs a confidence level eps")
        w = w or SAT_WEIGHTS
        return lambda pair: loss_sat(pair, phi, eps, w)
    if criterion == "cf":
        w = w or CF_WEIGHTS
        return lambda pair: loss_cf(pair, phi, w)
    raise ParameterError(f"criterion must be 'sat' or 'cf', got {criterion!r}")


def average_loss(dataset: Sequence[LabeledPair], phi: Formula, criterion: str = "sat",
                 eps: float | None = None, w: CalibrationWeights | None = None, *,
                 skip_errors: bool = False, failures: list | None = None,
                 names: Sequence[str] | None = None) -> float:
    """Mean per-pair loss.

    Failing pairs raise :class:`DatasetError` listing all of them, unless
    ``skip_errors`` is set, in which case they are dropped and appended to
    ``failures`` when a list is supplied.
    """
    if not dataset:
        raise ParameterError("dataset is empty")
    loss = _criterion(criterion, phi, eps, w)
    values, failed = [], []
    for i, pair in enumerate(dataset):
        try:
            values.append(loss(pair))
        except STLUError as exc:
            failed.append(PairFailure(i, names[i] if names else "", str(exc)))
    if failures is not None:
        failures.extend(failed)
    if failed and not skip_errors:
        raise DatasetError(failed)
    if not values:
        raise ParameterError("every pair in the dataset failed")
    return float(np.mean(values))


@dataclass
class SelectionResult:
    srt: SRT
    p: float
    loss: float
    table: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "winner": {"srt": self.srt.value, "p": self.p, "loss": self.loss},
            "table": {srt.value: {repr(p): loss for p, loss in row.items()}
                      for srt, row in self.table.items()},
        }


Generator = Callable[[Trace, int, float], Flowpipe]


def select_schema(candidates: Iterable[tuple[SRT, Generator]], dataset: Sequence[Sample],
                  phi: Formula, criterion: str = "cf", p_grid: Sequence[float] = (0.5,), *,
                  eps: float | None = None, w: CalibrationWeights | None = None) -> SelectionResult:
    """Pick the SRT and keep probability with the lowest average loss.

    Each generator turns ``(history, horizon, p)`` into a flowpipe, which is
    scored against the sample's target.  Ties on ``p`` go to the smaller
    value and ties across SRTs to the earlier candidate.
    """
    candidates = list(candidates)
    if not candidates:
        raise ParameterError("no candidate schemas")
    if not p_grid:
        raise ParameterError("empty p grid")
    if not dataset:
        raise ParameterError("dataset is empty")
    table = {}
    best = None
    for srt, gen in candidates:
        row = {}
        for p in sorted(p_grid):
            pairs = []
            for i, sample in enumerate(dataset):
                try:
                    fp = gen(sample.history, sample.target.length, p)
                except Exception as exc:
                    raise STLUError(
                        f"generator for {srt.value} failed on pair {i} {sample.name}: {exc}".replace("  ", " ")
                    ) from exc
                target = Trace({k: sample.target.values(k) for k in sample.target.variables}, fp.start)
                pairs.append(LabeledPair(fp, target))
            row[p] = average_loss(pairs, phi, criterion, eps, w)
        table[srt] = row
        p_star = min(row, key=lambda p: (row[p], p))
        if best is None or row[p_star] < best[2]:
            best = (srt, p_star, row[p_star])
    return SelectionResult(best[0], best[1], best[2], table)


@dataclass(frozen=True)
class EvalMetrics:
    """Test-set metrics.

    ``accuracy`` is the mean normalised squared error ``(y - m)^2 / (2 std^2)``;
    ``rmse`` is the plain root-mean-square error of the means.  ``f1_sat``
    labels a prediction positive when it weakly satisfies the formula and
    ``f1_sat_strong`` when it strongly satisfies it.
    """

    heter_loss: float
    accuracy: float
    rmse: float
    f1_sat: float
    f1_sat_strong: float
    skipped_points: int = 0
    no_positives: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _f1(pred, truth):
    tp = sum(p and g for p, g in zip(pred, truth))
    fp = sum(p and not g for p, g in zip(pred, truth))
    fn = sum(g and not p for p, g in zip(pred, truth))
    if tp == 0 and fp == 0 and fn == 0:
        return 1.0
    return tp / (tp + 0.5 * (fp + fn))


def eval_metrics(dataset: Sequence[LabeledPair], phi: Formula, eps: float) -> EvalMetrics:
    """HeterLoss, normalised accuracy, RMSE and F1-Sat over a dataset.

    Points with ``std = 0`` are left out of the two normalised metrics; a
    point with ``std = 0`` and ``y != mean`` is counted in
    ``skipped_points`` and logged.
    """
    if not dataset:
        raise ParameterError("dataset is empty")
    heter, accur, sq = [], [], []
    skipped = 0
    weak_pred, strong_pred, truth = [], [], []
    for i, pair in enumerate(dataset):
        fp, tr = pair.flowpipe, pair.target
        for var in fp.variables:
            y, m, s = tr.values(var), fp.mean(var), fp.std(var)
            dev2 = (y - m) ** 2
            sq.extend(dev2)
            ok = s > 0
            bad = (~ok) & (dev2 > 0)
            if bad.any():
                skipped += int(bad.sum())
                log.warning("pair %d variable %r: %d point(s) with std=0 and y != mean skipped",
                            i, var, int(bad.sum()))
            norm = dev2[ok] / (2.0 * s[ok] ** 2)
            accur.extend(norm)
            heter.extend(norm + 0.5 * np.log(2.0 * s[ok]))
        t = fp.start
        v = verdict(phi, fp, t, eps=eps)
        weak_pred.append(v.weak)
        strong_pred.append(v.strong)
        truth.append(trace_sat(phi, tr, t))
    return EvalMetrics(
        heter_loss=float(np.mean(heter)) if heter else math.nan,
        accuracy=float(np.mean(accur)) if accur else math.nan,
        rmse=float(math.sqrt(np.mean(sq))),
        f1_sat=_f1(weak_pred, truth),
        f1_sat_strong=_f1(strong_pred, truth),
        skipped_points=skipped,
        no_positives=not any(truth) and not any(weak_pred),
    )
