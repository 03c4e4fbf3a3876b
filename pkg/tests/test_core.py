import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stlu.core import (ConfidenceInterval, Flowpipe, GaussianPoint, Trace, confidence_interval,
                       coverage, coverage_level, flowpipe_from_samples, quantile,
                       trace_in_flowpipe, validate_flowpipe)
from stlu.errors import ParameterError, ShapeError

mpmath.mp.dps = 40


def mp_quantile(eps):
    """Two-sided normal quantile by root-finding the high-precision CDF."""
    return float(mpmath.findroot(lambda z: mpmath.erf(z / mpmath.sqrt(2)) - eps, 1.5))


DELTA_95 = 1.959963984540054  # mp_quantile(0.95), frozen


def test_frozen_quantile_matches_oracle():
    assert DELTA_95 == pytest.approx(mp_quantile(0.95), abs=1e-13)
    assert quantile(0.95) == pytest.approx(DELTA_95, abs=1e-12)


@pytest.mark.parametrize("eps", [1e-6, 0.01, 0.3, 0.5, 0.9, 0.99, 0.999999])
def test_quantile_against_mpmath(eps):
    assert quantile(eps) == pytest.approx(mp_quantile(eps), rel=1e-10)


@pytest.mark.parametrize("z", [0.0, 0.1, 1.0, 2.0, 3.5])
def test_coverage_inverts_quantile(z):
    assert coverage(z) == pytest.approx(float(mpmath.erf(z / mpmath.sqrt(2))), abs=1e-14)
    if z > 0:
        assert quantile(coverage(z)) == pytest.approx(z, rel=1e-9)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_quantile_rejects_bad_levels(eps):
    with pytest.raises(ParameterError):
        quantile(eps)


class TestConfidenceInterval:
    def test_zero_variance_collapses(self):
        ci = confidence_interval(GaussianPoint(5, 0), 10, 0.95)
        assert (ci.lo, ci.hi) == (5, 5)

    def test_unit_normal(self):
        ci = confidence_interval(GaussianPoint(0, 1), 1, 0.95)
        assert ci.lo == pytest.approx(-1.95996, abs=1e-4)
        assert ci.hi == pytest.approx(1.95996, abs=1e-4)

    def test_sqrt_n_scaling(self):
        ci = confidence_interval(GaussianPoint(0, 2), 4, 0.95)
        assert ci.hi == pytest.approx(1.95996, abs=1e-4)
        assert ci.lo == -ci.hi

    def test_bad_inputs(self):
        with pytest.raises(ParameterError):
            confidence_interval(GaussianPoint(0, 1), 0, 0.9)
        with pytest.raises(ParameterError):
            confidence_interval(GaussianPoint(0, 1), 1, 1.0)
        with pytest.raises(ParameterError):
            GaussianPoint(math.inf, 1)
        with pytest.raises(ParameterError):
            GaussianPoint(0, -1)

    @given(st.floats(-100, 100), st.floats(0, 10), st.integers(1, 50),
           st.floats(0.001, 0.999), st.floats(0.001, 0.999))
    def test_nested_and_symmetric(self, mean, std, n, e1, e2):
        e1, e2 = sorted((e1, e2))
        a = confidence_interval(GaussianPoint(mean, std), n, e1)
        b = confidence_interval(GaussianPoint(mean, std), n, e2)
        assert b.lo <= a.lo <= a.hi <= b.hi
        assert mean - a.lo == pytest.approx(a.hi - mean, abs=1e-9)

    def test_contains_is_closed(self):
        ci = ConfidenceInterval(-1.0, 1.0)
        assert 1.0 in ci and -1.0 in ci and 1.0000001 not in ci
        assert ci.width == 2.0


class TestFlowpipeFromSamples:
    def test_identical_rows(self):
        fp = flowpipe_from_samples(np.tile([1.0, 2.0, 3.0], (5, 1)))
        assert list(fp.mean("x")) == [1, 2, 3] and list(fp.std("x")) == [0, 0, 0]
        assert fp.sample_count == 5

    def test_two_rows(self):
        fp = flowpipe_from_samples({"x": [[0.0], [2.0]]})
        assert fp.mean("x")[0] == 1.0
        assert fp.std("x")[0] == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_two_pass_oracle(self):
        rows = np.random.default_rng(3).normal(2.0, 3.0, size=(100, 5))
        fp = flowpipe_from_samples(rows)
        for t in range(5):
            col = [float(r[t]) for r in rows]
            m = sum(col) / len(col)
            var = sum((c - m) ** 2 for c in col) / (len(col) - 1)
            assert fp.mean("x")[t] == pytest.approx(m, abs=1e-12)
            assert fp.std("x")[t] == pytest.approx(math.sqrt(var), abs=1e-12)

    def test_errors(self):
        with pytest.raises(ParameterError):
            flowpipe_from_samples([[1.0, 2.0]])
        with pytest.raises(ShapeError):
            flowpipe_from_samples([[1.0, 2.0], [1.0]])

    def test_samples_inside_wide_interval(self):
        rows = np.random.default_rng(4).normal(size=(200, 3))
        fp = flowpipe_from_samples(rows)
        for r in rows:
            assert trace_in_flowpipe(Trace({"x": r}), Flowpipe(
                {"x": fp.mean("x")}, {"x": fp.std("x")}, 1), 0.9999)


class TestContainment:
    fp = Flowpipe({"x": [0.0, 1.0]}, {"x": [1.0, 2.0]}, 4)

    def test_means_always_inside(self):
        tr = Trace({"x": [0.0, 1.0]})
        assert trace_in_flowpipe(tr, self.fp, 1e-6)
        assert coverage_level(tr, self.fp) == 0.0

    def test_three_sigma_outside(self):
        tr = Trace({"x": [3 * 1.0 / 2, 1.0]})
        assert not trace_in_flowpipe(tr, self.fp, 0.95)

    def test_zero_variance_mismatch(self):
        fp = Flowpipe({"x": [0.0]}, {"x": [0.0]})
        tr = Trace({"x": [0.5]})
        assert not trace_in_flowpipe(tr, fp, 0.999)
        assert coverage_level(tr, fp) == 1.0

    def test_coverage_level_value(self):
        fp = Flowpipe({"x": [0.0]}, {"x": [1.0]})
        assert coverage_level(Trace({"x": [1.95996]}), fp) == pytest.approx(0.95, abs=1e-4)

    def test_domain_mismatch(self):
        with pytest.raises(ShapeError):
            trace_in_flowpipe(Trace({"x": [0.0]}), self.fp, 0.5)
        with pytest.raises(ShapeError):
            coverage_level(Trace({"y": [0.0, 1.0]}), self.fp)

    @settings(max_examples=200)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=4), st.floats(0.001, 0.999))
    def test_membership_matches_coverage(self, ys, eps):
        n = len(ys)
        fp = Flowpipe({"x": np.zeros(n)}, {"x": np.linspace(0.5, 1.5, n)}, 3)
        tr = Trace({"x": ys})
        level = coverage_level(tr, fp)
        if abs(level - eps) > 1e-9:
            assert trace_in_flowpipe(tr, fp, eps) == (level <= eps)


    @settings(max_examples=300)
    @given(st.lists(st.floats(-8, 8), min_size=1, max_size=4), st.integers(1, 20))
    def test_coverage_level_is_the_exact_flip(self, ys, n):
        fp = Flowpipe({"x": np.zeros(len(ys))}, {"x": np.linspace(0.5, 1.5, len(ys))}, n)
        tr = Trace({"x": ys})
        level = coverage_level(tr, fp)
        if 0 < level < 1:
            assert trace_in_flowpipe(tr, fp, level)
            below = float(np.nextafter(level, 0))
            assert below == 0 or not trace_in_flowpipe(tr, fp, below)
        elif level == 1:
            assert not trace_in_flowpipe(tr, fp, float(np.nextafter(1.0, 0)))


class TestValidation:
    def test_well_formed(self):
        fp = Flowpipe({"x": [1.0, 2.0]}, {"x": [0.1, 0.2]}, 3, 5)
        assert validate_flowpipe(fp) == []
        assert validate_flowpipe(fp.to_dict()) == []

    def test_negative_std(self):
        data = Flowpipe({"x": [1.0, 2.0]}, {"x": [0.1, 0.2]}).to_dict()
        data["variables"]["x"][1]["std"] = -1
        problems = validate_flowpipe(data)
        assert len(problems) == 1 and "negative std" in problems[0]
        with pytest.raises(ShapeError):
            Flowpipe.from_dict(data)

    def test_ragged(self):
        data = {"sample_count": 1, "variables": {
            "x": [{"t": 0, "mean": 0, "std": 0}, {"t": 1, "mean": 0, "std": 0}],
            "y": [{"t": 0, "mean": 0, "std": 0}]}}
        assert any("domain mismatch" in p for p in validate_flowpipe(data))
        with pytest.raises(ShapeError):
            Flowpipe({"x": [0.0, 1.0], "y": [0.0]}, {"x": [0.0, 0.0], "y": [0.0]})

    def test_time_order(self):
        data = {"sample_count": 1, "variables": {
            "x": [{"t": 1, "mean": 0, "std": 0}, {"t": 0, "mean": 0, "std": 0}]}}
        assert any("non-monotone" in p for p in validate_flowpipe(data))

    def test_not_a_mapping(self):
        assert validate_flowpipe([1, 2]) != []
        assert validate_flowpipe({"sample_count": 0, "variables": {}}) != []


def test_json_round_trip():
    fp = Flowpipe({"x": [1.5, -2.0], "y": [0.0, 3.25]}, {"x": [0.5, 0.0], "y": [1.0, 2.0]}, 7, 3)
    again = Flowpipe.from_dict(json.loads(json.dumps(fp.to_dict())))
    assert again == fp and again.start == 3 and again.end == 4


def test_arrays_are_read_only():
    fp = Flowpipe({"x": [1.0]}, {"x": [0.5]})
    with pytest.raises(ValueError):
        fp.mean("x")[0] = 2.0
    tr = Trace({"x": [1.0, 2.0, 3.0]}, 10)
    assert tr.window(11, 13) == Trace({"x": [2.0, 3.0]}, 11)
    assert tr.window(11, 13, rebase=True).start == 0
