import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from randgen import rand_formula, rand_trace
from stlu.cli import DEFAULT_SEED, main, stream_steps
from stlu.confidence import IntervalSet, strong_range
from stlu.core import Flowpipe, Trace
from stlu.errors import ParameterError, ParseError, ShapeError
from stlu.formula import horizon, to_text
from stlu.io import dump_flowpipe, parse_spec, read_trace_csv, write_trace_csv
from stlu.monitor import trace_sat, verdict

DATA = Path(__file__).parent / "data"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_fp(path, means, stds, n=1):
    fp = Flowpipe({"x": means}, {"x": stds}, n)
    dump_flowpipe(fp, path)
    return path


class TestFormats:
    def test_spec_lines(self):
        reqs = parse_spec("# header\nr1: strong: x > 0 @ 0.9\n\nr-2: range: always[0,1] x < 3 # tail\n")
        assert [(r.id, r.mode) for r in reqs] == [("r1", "strong"), ("r-2", "range")]

    @pytest.mark.parametrize("text, err", [
        ("r1 x > 0", ParameterError), ("r1: fuzzy: x > 0", ParameterError),
        ("a b: weak: x > 0", ParameterError), ("r: weak: x > 0\nr: weak: x > 1", ParameterError),
        ("r: weak: x >", ParseError), ("# only comments\n", ParameterError)])
    def test_spec_errors(self, text, err):
        with pytest.raises(err):
            parse_spec(text)

    def test_spec_error_location(self):
        with pytest.raises(ParseError, match="reqs.spec:2"):
            parse_spec("a: weak: x > 0\nb: weak: x >", "reqs.spec")

    def test_trace_round_trip(self, tmp_path):
        tr = Trace({"x": [0.1, -2.5, 1e-17], "y": [1.0, 2.0, 3.0]}, 4)
        write_trace_csv(tr, tmp_path / "a.csv")
        assert read_trace_csv((tmp_path / "a.csv").read_text()) == tr

    @pytest.mark.parametrize("text", ["", "x,y\n0,1\n", "t,x\n0,1\n2,3\n", "t,x\n0,abc\n",
                                      "t,x\n", "t,x,x\n0,1,2\n", "t,x\n0,1,2\n"])
    def test_trace_errors(self, text):
        with pytest.raises(ShapeError):
            read_trace_csv(text)


class TestMonitor:
    def test_zero_variance_satisfied(self, tmp_path, capsys):
        fp = write_fp(tmp_path / "f.json", [1.0, 2.0, 3.0], [0.0] * 3)
        code, out, _ = run(["monitor", "--flowpipe", fp, "--formula", "always[0,2] x > 0 @ 0.9"],
                           capsys)
        assert code == 0
        res = json.loads(out)["results"][0]
        assert (res["strong"], res["weak"]) == (True, True)

    def test_neither_verdict_exits_one(self, tmp_path, capsys):
        fp = write_fp(tmp_path / "f.json", [9.0, 12.0, 9.5], [2.0, 0.5, 0.1])
        code, out, _ = run(["monitor", "--flowpipe", fp, "--formula", "always[0,2] x < 10 @ 0.95"],
                           capsys)
        res = json.loads(out)["results"][0]
        assert code == 1 and (res["strong"], res["weak"]) == (False, False)

    def test_mode_selects_verdict(self, tmp_path, capsys):
        fp = write_fp(tmp_path / "f.json", [0.0], [1.0], 100)
        args = ["monitor", "--flowpipe", fp, "--formula", "x < 0.1 @ 0.95"]
        assert run(args + ["--mode", "weak"], capsys)[0] == 0
        assert run(args + ["--mode", "strong"], capsys)[0] == 1
        assert run(args + ["--mode", "both"], capsys)[0] == 1
        code, out, _ = run(args + ["--mode", "range"], capsys)
        assert code == 0 and "strong_range" in json.loads(out)["results"][0]

    @pytest.mark.parametrize("content", ["{not json", "[]", '{"sample_count": 1}'])
    def test_bad_flowpipe_exits_two(self, tmp_path, capsys, content):
        (tmp_path / "f.json").write_text(content)
        code, _, err = run(["monitor", "--flowpipe", tmp_path / "f.json", "--formula", "x > 0"],
                           capsys)
        assert code == 2 and err.startswith("error:")

    def test_usage_errors_exit_two(self, tmp_path, capsys):
        fp = write_fp(tmp_path / "f.json", [1.0], [0.0])
        assert run(["monitor", "--flowpipe", fp], capsys)[0] == 2
        assert run(["monitor", "--flowpipe", fp, "--formula", "x >"], capsys)[0] == 2
        assert run(["monitor", "--flowpipe", fp, "--formula", "always[0,4] x > 0"], capsys)[0] == 2
        assert run(["monitor", "--flowpipe", fp, "--formula", "x > 0"], capsys)[0] == 2
        assert run(["frobnicate"], capsys)[0] == 2
        assert run(["monitor", "--flowpipe", tmp_path / "missing.json", "--formula", "x > 0"],
                   capsys)[0] == 2

    def test_spec_file(self, tmp_path, capsys):
        fp = write_fp(tmp_path / "f.json", [1.0, 2.0], [0.5, 0.5], 4)
        spec = tmp_path / "r.spec"
        spec.write_text("a: strong: always[0,1] x > 0 @ 0.9\nb: weak: x > 5 @ 0.9\n")
        code, out, _ = run(["monitor", "--flowpipe", fp, "--spec", spec], capsys)
        assert code == 1
        assert [r["id"] for r in json.loads(out)["results"]] == ["a", "b"]

    @settings(max_examples=40, deadline=None,
              suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(st.integers(0, 2**32 - 1))
    def test_exit_code_is_a_function_of_verdicts(self, tmp_path, capsys, seed):
        rng = np.random.default_rng(seed)
        lines, expected = [], 0
        phis = [rand_formula(rng, 2) for _ in range(int(rng.integers(1, 4)))]
        n = max(horizon(p) for p in phis) + 1
        fp = Flowpipe({v: rng.uniform(-5, 5, n) for v in "xy"},
                      {v: rng.uniform(0, 2, n) for v in "xy"}, 3)
        dump_flowpipe(fp, tmp_path / "f.json")
        for i, phi in enumerate(phis):
            mode = ["strong", "weak", "both", "range"][rng.integers(4)]
            lines.append(f"r{i}: {mode}: {to_text(phi)}")
            if mode != "range":
                v = verdict(phi, fp, eps=0.5)
                ok = {"strong": v.strong, "weak": v.weak, "both": v.strong and v.weak}[mode]
                expected |= not ok
        broken = rng.random() < 0.2
        if broken:
            lines.append("bad: weak: x > > 1")
        (tmp_path / "r.spec").write_text("\n".join(lines) + "\n")
        code, _, _ = run(["monitor", "--flowpipe", tmp_path / "f.json", "--spec",
                          tmp_path / "r.spec", "--epsilon", "0.5"], capsys)
        assert code == (2 if broken else int(expected))

    @settings(max_examples=40, deadline=None,
              suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(st.integers(0, 2**32 - 1))
    def test_zero_variance_agrees_with_trace(self, tmp_path, capsys, seed):
        rng = np.random.default_rng(seed)
        phi = rand_formula(rng, 3)
        tr = rand_trace(rng, horizon(phi) + 1)
        dump_flowpipe(Flowpipe.from_trace(tr), tmp_path / "f.json")
        code, out, _ = run(["monitor", "--flowpipe", tmp_path / "f.json", "--formula",
                            to_text(phi), "--epsilon", "0.7"], capsys)
        res = json.loads(out)["results"][0]
        assert res["strong"] == res["weak"] == trace_sat(phi, tr)
        assert code == (0 if trace_sat(phi, tr) else 1)


class TestConfidence:
    def test_worked_conjunction(self, tmp_path, capsys):
        from test_confidence import worked_example_flowpipe
        fp = worked_example_flowpipe()
        dump_flowpipe(fp, tmp_path / "f.json")
        code, out, _ = run(["confidence", "--flowpipe", tmp_path / "f.json", "--formula",
                            "(always[1,3] x > 8 @ ?) and (eventually[1,3] x < 10 @ ?)"], capsys)
        rng = IntervalSet.from_json(json.loads(out)["results"][0]["strong_range"])
        assert code == 0
        assert rng.inf() == 0.0 and rng.sup() == pytest.approx(0.20, abs=1e-9)

    def test_empty_set_is_empty_list(self, tmp_path, capsys):
        fp = write_fp(tmp_path / "f.json", [1.0, -1.0], [0.5, 0.5])
        _, out, _ = run(["confidence", "--flowpipe", fp, "--formula", "always[0,1] x > 0"], capsys)
        assert json.loads(out)["results"][0]["strong_range"] == []

    def test_round_trip(self, tmp_path, capsys):
        fp_obj = Flowpipe({"x": [1.0, 2.0, 0.5]}, {"x": [0.7, 1.5, 0.2]}, 2)
        dump_flowpipe(fp_obj, tmp_path / "f.json")
        text = "eventually[0,2] (x > 1.2 and not x > 2.6)"
        _, out, _ = run(["confidence", "--flowpipe", tmp_path / "f.json", "--formula", text],
                        capsys)
        got = IntervalSet.from_json(json.loads(out)["results"][0]["strong_range"])
        from stlu.formula import parse
        assert got == strong_range(parse(text), fp_obj)


def calib_dirs(tmp_path, pairs):
    fdir, tdir = tmp_path / "fp", tmp_path / "tr"
    fdir.mkdir()
    tdir.mkdir()
    for name, (fp, tr) in pairs.items():
        if fp is not None:
            dump_flowpipe(fp, fdir / f"{name}.json")
        if tr is not None:
            write_trace_csv(tr, tdir / f"{name}.csv")
    return fdir, tdir


class TestCalibrate:
    def exact(self, values):
        tr = Trace({"x": values})
        return Flowpipe.from_trace(tr), tr

    def test_exact_pairs_zero_loss(self, tmp_path, capsys):
        f, t = calib_dirs(tmp_path, {"a": self.exact([1.0, 2.0]), "b": self.exact([-1.0, 0.5])})
        code, out, _ = run(["calibrate", "--flowpipes", f, "--traces", t, "--formula",
                            "always[0,1] x > 0", "--criterion", "sat", "--epsilon", "0.9"], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["loss"] == 0.0 and rep["pairs"] == 2
        assert rep["metrics"]["f1_sat"] == 1.0

    def test_cf_defaults(self, tmp_path, capsys):
        f, t = calib_dirs(tmp_path, {"a": self.exact([1.0])})
        _, out, _ = run(["calibrate", "--flowpipes", f, "--traces", t, "--formula", "x > 0"],
                        capsys)
        rep = json.loads(out)
        assert rep["criterion"] == "cf" and rep["weights"] == {"beta1": 0.3, "beta2": 0.3}

    def test_orphans(self, tmp_path, capsys):
        a = self.exact([1.0])
        f, t = calib_dirs(tmp_path, {"a": a, "b": (a[0], None), "c": (None, a[1])})
        code, _, err = run(["calibrate", "--flowpipes", f, "--traces", t, "--formula", "x > 0"],
                           capsys)
        assert code == 2 and "b (only flowpipe)" in err and "c (only trace)" in err

    def test_skip_errors(self, tmp_path, capsys):
        f, t = calib_dirs(tmp_path, {"a": self.exact([2.0]), "b": self.exact([-1.0]),
                                     "c": self.exact([3.0])})
        args = ["calibrate", "--flowpipes", f, "--traces", t, "--formula", "log(x) > 0",
                "--criterion", "sat", "--epsilon", "0.9"]
        code, out, _ = run(args, capsys)
        assert code == 2 and json.loads(out)["failures"][0]["pair"] == "b"
        code, out, _ = run(args + ["--skip-errors"], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["skipped"] == 1 and set(rep["per_pair"]) == {"a", "c"}

    def test_jobs_do_not_change_output(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        pairs = {f"p{i}": (Flowpipe({"x": rng.normal(size=3)}, {"x": rng.uniform(0, 1, 3)}, 4),
                           Trace({"x": rng.normal(size=3)})) for i in range(6)}
        f, t = calib_dirs(tmp_path, pairs)
        args = ["calibrate", "--flowpipes", f, "--traces", t, "--formula", "always[0,2] x > -1"]
        assert run(args, capsys)[1] == run(args + ["--jobs", "3"], capsys)[1]


class TestSelectSchema:
    def test_runs_and_reports(self, tmp_path, capsys):
        write_trace_csv(Trace({"x": 10 * 0.95 ** np.arange(60)}), tmp_path / "a.csv")
        code, out, _ = run(["select-schema", "--traces", tmp_path / "a.csv", "--formula",
                            "always[0,3] x > 0", "--window", "10", "--horizon", "4",
                            "--p", "0.5,0.9", "--srt", "bernoulli_dropout", "--srt",
                            "gaussian_dropconnect", "--n-samples", "20", "--order", "1"], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["samples"] == 12
        assert set(rep["table"]) == {"bernoulli_dropout", "gaussian_dropconnect"}
        assert rep["winner"]["p"] in (0.5, 0.9)

    def test_horizon_too_short(self, tmp_path, capsys):
        write_trace_csv(Trace({"x": np.ones(30)}), tmp_path / "a.csv")
        code, _, _ = run(["select-schema", "--traces", tmp_path / "a.csv", "--formula",
                          "always[0,5] x > 0", "--window", "10", "--horizon", "4"], capsys)
        assert code == 2


def stream_args(trace, spec, **kw):
    opts = {"window": 10, "horizon": 4, "stride": 1, "n-samples": 8, "order": 1}
    opts.update(kw)
    out = ["stream", "--trace", trace, "--spec", spec]
    for k, v in opts.items():
        out += [f"--{k}", v]
    return out


class TestStream:
    @pytest.fixture
    def files(self, tmp_path):
        write_trace_csv(Trace({"x": 5 + np.sin(np.arange(53) / 3)}), tmp_path / "a.csv")
        (tmp_path / "r.spec").write_text("up: weak: always[0,3] x > 0 @ 0.9\n"
                                         "hi: strong: eventually[0,2] x > 5.5 @ 0.9\n")
        return tmp_path / "a.csv", tmp_path / "r.spec"

    @pytest.mark.parametrize("window, stride", [(10, 10), (10, 1), (7, 3), (20, 33)])
    def test_step_count(self, files, capsys, window, stride):
        code, out, _ = run(stream_args(*files, window=window, stride=stride), capsys)
        lines = [json.loads(l) for l in out.splitlines()]
        expected = (53 - window) // stride
        assert len(lines) == expected + 1 and lines[-1]["summary"]["steps"] == expected
        assert [l["step"] for l in lines[:-1]] == list(range(1, expected + 1))
        ts = [l["t"] for l in lines[:-1]]
        assert all(b - a == stride for a, b in zip(ts, ts[1:]))
        assert ts[:1] in ([], [window])

    def test_schedule_arithmetic(self):
        assert stream_steps(100, 20, 20) == [20, 40, 60, 80]
        assert stream_steps(20, 20, 1) == []

    def test_deterministic_bytes(self, files, capsys):
        args = stream_args(*files, srt="gaussian_dropout", p=0.6)
        assert run(args, capsys)[1] == run(args, capsys)[1]
        assert run(args, capsys)[1] != run(args + ["--seed", "1"], capsys)[1]

    def test_constant_trace_no_violations(self, tmp_path, capsys):
        write_trace_csv(Trace({"x": np.full(40, 3.0)}), tmp_path / "c.csv")
        (tmp_path / "r.spec").write_text("a: both: always[0,3] x > -1000 @ 0.99\n")
        code, out, _ = run(stream_args(tmp_path / "c.csv", tmp_path / "r.spec"), capsys)
        assert code == 0
        assert json.loads(out.splitlines()[-1])["summary"]["violations"] == {"a": 0}
        # identity masks keep the exact fit, so even a tight band holds
        (tmp_path / "r.spec").write_text("a: both: always[0,3] x > 2.999 @ 0.99 and x < 3.001 @ 0.99\n")
        code, out, _ = run(stream_args(tmp_path / "c.csv", tmp_path / "r.spec", p=1.0), capsys)
        assert code == 0

    def test_fixed_model(self, files, tmp_path, capsys):
        (tmp_path / "m.json").write_text('{"order": 1, "weights": [1.0], "bias": 0.0}')
        code, out, _ = run(stream_args(*files, model=tmp_path / "m.json", p=1.0), capsys)
        first = json.loads(out.splitlines()[0])
        assert first["results"]["up"]["weak"] is True

    @pytest.mark.parametrize("kw", [{"horizon": 2}, {"window": 1}, {"stride": 0},
                                    {"window": 60}, {"p": 0}])
    def test_inconsistent_config(self, files, capsys, kw):
        code, out, _ = run(stream_args(*files, **kw), capsys)
        assert code == 2 and out == ""

    def test_golden_file(self, capsys):
        sys.path.insert(0, str(DATA))
        try:
            from make_stream_fixture import STREAM_ARGS
        finally:
            sys.path.remove(str(DATA))
        run(STREAM_ARGS, capsys)
        assert run(STREAM_ARGS, capsys)[1] == (DATA / "stream_golden.jsonl").read_text()


class TestBench:
    def test_single_flowpipe(self, capsys):
        code, out, _ = run(["bench", "--count", "1"], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["count"] == 1 and rep["horizon"] == 8
        assert rep["strong_satisfied"] <= rep["weak_satisfied"] <= 1

    def test_parallel_counts_match(self, capsys):
        one = json.loads(run(["bench", "--count", "400"], capsys)[1])
        two = json.loads(run(["bench", "--count", "400", "--jobs", "2"], capsys)[1])
        assert (one["strong_satisfied"], one["weak_satisfied"]) == \
            (two["strong_satisfied"], two["weak_satisfied"])

    def test_horizon_check(self, capsys):
        assert run(["bench", "--count", "1", "--horizon", "4"], capsys)[0] == 2

    def test_doubling_count(self, capsys):
        def wall(n):
            return min(json.loads(run(["bench", "--count", n], capsys)[1])["wall_seconds"]
                       for _ in range(2))
        assert wall(8000) <= 2.5 * wall(4000)


def test_default_seed_documented(capsys):
    assert main(["stream", "--help"]) == 0
    assert str(DEFAULT_SEED) in capsys.readouterr().out


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "stlu.cli", "validate", "--formula", "x > 0"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["valid"] is True
