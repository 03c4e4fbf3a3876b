"""``stlu`` command-line interface.

Exit codes: 0 when every requested verdict holds (or the command has no
verdict), 1 when any requirement is violated, 2 on input or usage errors.
All randomness derives from ``--seed`` (default :data:`DEFAULT_SEED`).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import calibrate as cal
from .confidence import strong_range, weak_range
from .core import Flowpipe, Trace, validate_flowpipe
from .errors import STLUError
from .formula.nodes import horizon as formula_horizon
from .formula.parser import parse
from .io import MODES, Requirement, load_flowpipe, load_model, load_spec, load_trace
from .monitor import _FlowpipeMonitor, check_horizon, verdict
from .predictor import SRT, Schema, fit_ar, mc_predict, stream_rng

__all__ = ["main", "build_parser", "DEFAULT_SEED"]

DEFAULT_SEED = 20240601
log = logging.getLogger("stlu")


class UsageError(STLUError):
    pass


def _emit(obj, out=None):
    out = out or sys.stdout
    out.write(json.dumps(obj, sort_keys=False) + "\n")


def _requirements(args) -> list[Requirement]:
    if bool(args.formula) == bool(args.spec):
        raise UsageError("give exactly one of --formula or --spec")
    if args.spec:
        return load_spec(args.spec)
    mode = getattr(args, "mode", None) or "both"
    return [Requirement("formula", mode, args.formula, parse(args.formula))]


def _evaluate(req: Requirement, fp: Flowpipe, t: int, eps, mode_override=None) -> tuple[dict, bool]:
    """Report entry for one requirement and whether it counts as satisfied."""
    mode = mode_override or req.mode
    entry = {"id": req.id, "mode": mode}
    if mode == "range":
        check_horizon(req.formula, fp, t)
        entry["strong_range"] = strong_range(req.formula, fp, t).to_json()
        entry["weak_range"] = weak_range(req.formula, fp, t).to_json()
        return entry, True
    v = verdict(req.formula, fp, t, eps=eps)
    entry["strong"], entry["weak"] = v.strong, v.weak
    ok = {"strong": v.strong, "weak": v.weak, "both": v.strong and v.weak}[mode]
    return entry, ok


# -- monitor / confidence / validate -------------------------------------------------


def cmd_monitor(args) -> int:
    fp = load_flowpipe(args.flowpipe)
    reqs = _requirements(args)
    override = args.mode if args.spec and args.mode else None
    results, all_ok = [], True
    for req in reqs:
        entry, ok = _evaluate(req, fp, args.t, args.epsilon, override)
        results.append(entry)
        all_ok &= ok
    _emit({"t": args.t, "satisfied": all_ok, "results": results})
    return 0 if all_ok else 1


def cmd_confidence(args) -> int:
    fp = load_flowpipe(args.flowpipe)
    results = []
    for req in _requirements(args):
        check_horizon(req.formula, fp, args.t)
        results.append({"id": req.id,
                        "strong_range": strong_range(req.formula, fp, args.t).to_json(),
                        "weak_range": weak_range(req.formula, fp, args.t).to_json()})
    _emit({"t": args.t, "results": results})
    return 0


def cmd_validate(args) -> int:
    if not (args.flowpipe or args.spec or args.formula or args.trace):
        raise UsageError("nothing to validate; give --flowpipe, --trace, --spec or --formula")
    problems = []
    for path in args.flowpipe or ():
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            problems.append(f"{path}: malformed JSON: {exc}")
            continue
        problems.extend(f"{path}: {p}" for p in validate_flowpipe(data))
    for path in args.trace or ():
        try:
            load_trace(path)
        except STLUError as exc:
            problems.append(str(exc))
    if args.spec:
        try:
            load_spec(args.spec)
        except STLUError as exc:
            problems.append(str(exc))
    if args.formula:
        try:
            parse(args.formula)
        except STLUError as exc:
            problems.append(f"formula: {exc}")
    _emit({"valid": not problems, "problems": problems})
    return 0 if not problems else 1


# -- calibrate -----------------------------------------------------------------------


def _paired_files(fp_dir, tr_dir):
    fps = {p.stem: p for p in sorted(Path(fp_dir).glob("*.json"))}
    trs = {p.stem: p for p in sorted(Path(tr_dir).glob("*.csv"))}
    orphans = sorted(set(fps) ^ set(trs))
    if orphans:
        detail = ", ".join(f"{n} (only {'flowpipe' if n in fps else 'trace'})" for n in orphans)
        raise UsageError(f"unpaired files: {detail}")
    if not fps:
        raise UsageError(f"no flowpipe/trace pairs found in {fp_dir} and {tr_dir}")
    return [(name, fps[name], trs[name]) for name in sorted(fps)]


def _pair_loss(job):
    name, fp_path, tr_path, text, criterion, b1, b2, eps = job
    try:
        phi = parse(text)
        pair = cal.LabeledPair(load_flowpipe(fp_path), load_trace(tr_path))
        w = cal.CalibrationWeights(b1, b2)
        if criterion == "sat":
            return name, cal.loss_sat(pair, phi, eps, w), None
        return name, cal.loss_cf(pair, phi, w), None
    except STLUError as exc:
        return name, None, str(exc)


def _map(fn, jobs, n_jobs):
    """Ordered map; results come back in input order whatever ``n_jobs`` is."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * n_jobs))))


def _weights(args, criterion):
    default = cal.SAT_WEIGHTS if criterion == "sat" else cal.CF_WEIGHTS
    return cal.CalibrationWeights(args.beta1 if args.beta1 is not None else default.beta1,
                                  args.beta2 if args.beta2 is not None else default.beta2)


def cmd_calibrate(args) -> int:
    parse(args.formula)
    if args.criterion == "sat" and args.epsilon is None:
        raise UsageError("--criterion sat needs --epsilon")
    w = _weights(args, args.criterion)
    files = _paired_files(args.flowpipes, args.traces)
    jobs = [(name, str(f), str(t), args.formula, args.criterion, w.beta1, w.beta2, args.epsilon)
            for name, f, t in files]
    rows = _map(_pair_loss, jobs, args.jobs)
    failures = [{"pair": n, "error": e} for n, _, e in rows if e is not None]
    losses = [l for _, l, e in rows if e is None]
    report = {"criterion": args.criterion, "weights": {"beta1": w.beta1, "beta2": w.beta2},
              "epsilon": args.epsilon, "pairs": len(rows), "skipped": len(failures),
              "failures": failures}
    if failures and not args.skip_errors:
        report["loss"] = None
        _emit(report)
        for f in failures:
            log.error("pair %s: %s", f["pair"], f["error"])
        return 2
    if not losses:
        raise UsageError("every pair failed")
    report["loss"] = float(np.mean(losses))
    report["per_pair"] = {n: l for n, l, e in rows if e is None}
    if args.epsilon is not None:
        phi = parse(args.formula)
        good = [cal.LabeledPair(load_flowpipe(f), load_trace(t))
                for (n, f, t) in files if n in report["per_pair"]]
        report["metrics"] = _jsonable(cal.eval_metrics(good, phi, args.epsilon).to_dict())
    _emit(report)
    return 0


def _jsonable(d):
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


# -- select-schema -------------------------------------------------------------------


def _windows(trace: Trace, var: str, window: int, horizon: int, stride: int, name: str):
    vals = trace.values(var)
    out = []
    for tau in range(window, len(vals) - horizon + 1, stride):
        out.append(cal.Sample(Trace({var: vals[tau - window:tau]}),
                              Trace({var: vals[tau:tau + horizon]}), f"{name}@{tau}"))
    return out


def cmd_select_schema(args) -> int:
    phi = parse(args.formula)
    horizon = args.horizon
    if horizon < formula_horizon(phi) + 1:
        raise UsageError(f"--horizon {horizon} too short for formula horizon {formula_horizon(phi)}")
    dataset = []
    for path in args.traces:
        tr = load_trace(path)
        var = args.var or tr.variables[0]
        dataset += _windows(tr, var, args.window, horizon, args.stride or horizon, Path(path).stem)
    if not dataset:
        raise UsageError("traces too short for one (window, horizon) sample")
    srts = [SRT.parse(s) for s in (args.srt or [m.value for m in SRT])]
    p_grid = args.p or [0.1, 0.3, 0.5, 0.7, 0.9]
    model = load_model(args.model) if args.model else None
    candidates = [(srt, _ar_gen(srt, args.n_samples, args.seed, args.order, model,
                                args.var or None, args.resample_per_step)) for srt in srts]
    if args.criterion == "sat" and args.epsilon is None:
        raise UsageError("--criterion sat needs --epsilon")
    res = cal.select_schema(candidates, dataset, phi, args.criterion, p_grid,
                            eps=args.epsilon, w=_weights(args, args.criterion))
    report = res.to_dict()
    report["samples"] = len(dataset)
    _emit(report)
    return 0


def _ar_gen(srt, n_samples, seed, order, model, var, resample):
    def generate(history, horizon, p):
        name = var or history.variables[0]
        values = history.values(name)
        m = model if model is not None else fit_ar(values, order)
        return mc_predict(m, values, horizon, Schema(srt, p), n_samples, seed, var=name,
                          resample_per_step=resample)
    return generate


# -- stream --------------------------------------------------------------------------


def stream_steps(length: int, window: int, stride: int) -> list[int]:
    """Prediction times ``tau = window + j * stride``, ``0 <= j < (length - window) // stride``.

    Step ``j`` predicts from ``trace[tau - window, tau)``; a step is only
    taken when the ``stride`` observations following ``tau`` exist.
    """
    return [window + j * stride for j in range(max(0, (length - window) // stride))]


def cmd_stream(args, out=None) -> int:
    out = out or sys.stdout
    trace = load_trace(args.trace)
    reqs = load_spec(args.spec)
    model = load_model(args.model) if args.model else None
    order = model.order if model else args.order
    need = max(formula_horizon(r.formula) for r in reqs) + 1
    if args.stride < 1:
        raise UsageError("--stride must be >= 1")
    if args.window < order:
        raise UsageError(f"--window {args.window} shorter than model order {order}")
    if model is None and args.window <= order + 1:
        raise UsageError(f"--window {args.window} too short to fit an AR({order}) model")
    if args.horizon < need:
        raise UsageError(f"--horizon {args.horizon} shorter than required {need} steps")
    if trace.length < args.window:
        raise UsageError(f"trace has {trace.length} points, window needs {args.window}")
    schema = Schema(SRT.parse(args.srt), args.p)
    violations = {r.id: 0 for r in reqs}
    steps = stream_steps(trace.length, args.window, args.stride)
    for j, tau in enumerate(steps, 1):
        means, stds = {}, {}
        for vi, var in enumerate(trace.variables):
            hist = trace.values(var)[tau - args.window:tau]
            m = model if model is not None else fit_ar(hist, order)
            fp = mc_predict(m, hist, args.horizon, schema, args.n_samples, args.seed,
                            var=var, resample_per_step=args.resample_per_step, stream=(j, vi))
            means[var], stds[var] = fp.mean(var), fp.std(var)
        fp = Flowpipe(means, stds, args.n_samples, 0)
        results = {}
        for req in reqs:
            entry, ok = _evaluate(req, fp, 0, args.epsilon)
            del entry["id"]
            results[req.id] = entry
            violations[req.id] += not ok
        _emit({"step": j, "t": trace.start + tau, "results": results}, out)
    _emit({"summary": {"steps": len(steps), "violations": violations}}, out)
    return 0 if not any(violations.values()) else 1


# -- bench ---------------------------------------------------------------------------


def _bench_chunk(job):
    text, means, stds, n, eps = job
    phi = parse(text)
    strong = weak = 0
    for m, s in zip(means, stds):
        fp = Flowpipe({"x": m}, {"x": s}, n, 0)
        mon = _FlowpipeMonitor(fp, eps, 256)
        strong += mon.sat(phi, 0, True)
        weak += mon.sat(phi, 0, False)
    return strong, weak


def cmd_bench(args) -> int:
    phi = parse(args.formula)
    if args.count < 1 or args.horizon < 1:
        raise UsageError("--count and --horizon must be positive")
    if formula_horizon(phi) + 1 > args.horizon:
        raise UsageError(f"--horizon {args.horizon} too short for {args.formula!r}")
    t0 = time.perf_counter()
    rng = stream_rng(args.seed, 0)
    means = rng.normal(2.0, 1.0, size=(args.count, args.horizon))
    stds = rng.uniform(0.0, 1.0, size=(args.count, args.horizon))
    n_jobs = max(1, args.jobs)
    bounds = np.linspace(0, args.count, min(args.count, 4 * n_jobs) + 1).astype(int)
    jobs = [(args.formula, means[a:b], stds[a:b], args.n_samples, args.epsilon)
            for a, b in zip(bounds, bounds[1:]) if b > a]
    parts = _map(_bench_chunk, jobs, n_jobs)
    wall = time.perf_counter() - t0
    _emit({"count": args.count, "horizon": args.horizon, "formula": args.formula,
           "jobs": n_jobs, "strong_satisfied": sum(p[0] for p in parts),
           "weak_satisfied": sum(p[1] for p in parts), "wall_seconds": round(wall, 4),
           "flowpipes_per_second": round(args.count / wall, 1) if wall > 0 else None})
    return 0


# -- parser --------------------------------------------------------------------------


def _p_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlu", description="STL-U predictive monitoring toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def formula_args(p, spec=True):
        p.add_argument("--formula", help="STL-U formula text")
        if spec:
            p.add_argument("--spec", help="requirement file, one 'id: mode: formula' per line")

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"random seed (default {DEFAULT_SEED})")

    def weights(p):
        p.add_argument("--criterion", choices=("sat", "cf"), default="cf")
        p.add_argument("--beta1", type=float)
        p.add_argument("--beta2", type=float)
        p.add_argument("--epsilon", type=float, help="confidence level for unannotated atoms")

    def predictor(p):
        p.add_argument("--srt", default="bernoulli_dropout", help="SRT name")
        p.add_argument("--p", type=float, default=0.5, help="keep probability")
        p.add_argument("--n-samples", type=int, default=100)
        p.add_argument("--order", type=int, default=2, help="AR order when fitting")
        p.add_argument("--model", help="fixed AR model JSON instead of per-window fits")
        p.add_argument("--resample-per-step", action="store_true",
                       help="draw a fresh mask at every rollout step")

    p = sub.add_parser("monitor", help="strong/weak verdicts of a flowpipe")
    p.add_argument("--flowpipe", required=True)
    formula_args(p)
    p.add_argument("--mode", choices=MODES, help="verdict mode (default both; overrides spec modes)")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--t", type=int, default=0)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("confidence", help="confidence guarantee ranges")
    p.add_argument("--flowpipe", required=True)
    formula_args(p)
    p.add_argument("--t", type=int, default=0)
    p.set_defaults(func=cmd_confidence)

    p = sub.add_parser("calibrate", help="average calibration loss over flowpipe/trace pairs")
    p.add_argument("--flowpipes", required=True, help="directory of <name>.json flowpipes")
    p.add_argument("--traces", required=True, help="directory of <name>.csv target traces")
    p.add_argument("--formula", required=True)
    weights(p)
    p.add_argument("--skip-errors", action="store_true", help="drop failing pairs and count them")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("select-schema", help="pick the SRT and keep probability")
    p.add_argument("--traces", nargs="+", required=True, help="trace CSV files")
    p.add_argument("--formula", required=True)
    p.add_argument("--var", help="variable to predict (default: first column)")
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--stride", type=int, help="sample stride (default: horizon)")
    weights(p)
    p.add_argument("--srt", action="append", help="candidate SRT (repeatable; default all)")
    p.add_argument("--p", type=_p_list, help="comma-separated keep probabilities")
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--model")
    p.add_argument("--resample-per-step", action="store_true")
    common(p)
    p.set_defaults(func=cmd_select_schema)

    p = sub.add_parser("stream", help="sliding-window predictive monitoring of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--epsilon", type=float)
    predictor(p)
    common(p)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("bench", help="monitoring throughput on random flowpipes")
    p.add_argument("--count", type=int, default=130_000)
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--formula", default="always[0,7] x > 0 @ 0.95")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n-samples", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="check flowpipe, trace, spec or formula inputs")
    p.add_argument("--flowpipe", action="append")
    p.add_argument("--trace", action="append")
    formula_args(p)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (STLUError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
