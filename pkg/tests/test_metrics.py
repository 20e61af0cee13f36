import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentcast.metrics import (
    DegenerateScaleError,
    evaluate_panel,
    mase,
    naive2,
    owa,
    seasonal_indices,
    seasonality_test,
    smape,
)
from latentcast.panel import SeriesMatrix


# ---------------------------------------------------------------------------
# Independent brute-force evaluators, written from the formulas with plain
# loops.  The library must agree with these, not the other way around.
# ---------------------------------------------------------------------------

def smape_brute(actual, forecast):
    total = 0.0
    for y, f in zip(actual, forecast):
        if y == 0 and f == 0:
            continue
        total += abs(y - f) / abs(y + f)
    return 2.0 / len(actual) * total * 100.0


def mase_brute(actual, forecast, insample, m):
    denom = 0.0
    n = len(insample)
    for t in range(m, n):
        denom += abs(insample[t] - insample[t - m])
    denom /= n - m
    num = sum(abs(y - f) for y, f in zip(actual, forecast)) / len(actual)
    return num / denom


def owa_brute(s, ms, s2, ms2):
    return 0.5 * (s / s2 + ms / ms2)


finite_floats = st.floats(min_value=0.5, max_value=1e4, allow_nan=False)


class TestSmape:
    def test_perfect_forecast(self):
        assert smape([3.0, 4.0], [3.0, 4.0]) == 0.0

    def test_hand_example(self):
        # (2/2) * (10/210 + 10/390) * 100
        assert smape([100.0, 200.0], [110.0, 190.0]) == pytest.approx(7.326007326, abs=1e-6)

    def test_zero_actual_positive_forecast_is_200(self):
        assert smape([0.0], [5.0]) == pytest.approx(200.0)

    def test_both_zero_term_contributes_nothing(self):
        assert smape([0.0, 1.0], [0.0, 1.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            smape([1.0], [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            smape([], [])

    @given(st.lists(finite_floats, min_size=1, max_size=18), st.integers(0, 2**31))
    @settings(max_examples=80, deadline=None)
    def test_matches_brute_force_and_symmetry(self, actual, seed):
        rng = np.random.default_rng(seed)
        forecast = rng.uniform(0.5, 1e4, size=len(actual))
        a = np.array(actual)
        assert smape(a, forecast) == pytest.approx(smape_brute(a, forecast), rel=1e-12)
        assert smape(a, forecast) == pytest.approx(smape(forecast, a), rel=1e-12)

    @given(st.lists(finite_floats, min_size=2, max_size=12), st.floats(0.1, 100))
    @settings(max_examples=40, deadline=None)
    def test_scale_invariance(self, actual, c):
        rng = np.random.default_rng(len(actual))
        forecast = rng.uniform(0.5, 1e4, size=len(actual))
        a = np.array(actual)
        assert smape(c * a, c * forecast) == pytest.approx(smape(a, forecast), rel=1e-9)

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(3)
        a, f = rng.uniform(1, 10, 8), rng.uniform(1, 10, 8)
        perm = rng.permutation(8)
        assert smape(a[perm], f[perm]) == pytest.approx(smape(a, f), rel=1e-12)


class TestMase:
    def test_perfect_forecast(self):
        insample = np.arange(1.0, 25.0)
        assert mase([25.0], [25.0], insample, 12) == 0.0

    def test_hand_example_linear_ramp(self):
        # seasonal differences of 1..24 at lag 12 are all 12
        insample = np.arange(1.0, 25.0)
        assert mase([25.0], [24.0], insample, 12) == pytest.approx(1.0 / 12.0)

    def test_exact_periodic_continuation(self):
        cycle = np.array([3.0, 1.0, 4.0, 1.0])
        insample = np.tile(cycle, 6) + np.arange(24) * 0.5  # periodic + drift, nonzero scale
        actual = insample[-4:] + 2.0
        assert mase(actual, actual, insample, 4) == 0.0

    def test_degenerate_scale_flagged(self):
        insample = np.tile([5.0, 7.0], 12)
        with pytest.raises(DegenerateScaleError):
            mase([5.0], [6.0], insample, 2)

    def test_insample_too_short(self):
        with pytest.raises(ValueError, match="more than period"):
            mase([1.0], [1.0], np.ones(12), 12)

    @given(st.integers(0, 2**31), st.floats(0.1, 50.0))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_and_scales(self, seed, c):
        rng = np.random.default_rng(seed)
        n, h, m = 30, 6, 12
        insample = rng.uniform(1, 100, n)
        actual = rng.uniform(1, 100, h)
        forecast = rng.uniform(1, 100, h)
        got = mase(actual, forecast, insample, m)
        assert got == pytest.approx(mase_brute(actual, forecast, insample, m), rel=1e-12)
        assert mase(c * actual, c * forecast, c * insample, m) == pytest.approx(got, rel=1e-9)


def reference_seasonal_indices(y, m):
    """Classical multiplicative decomposition, written loop-by-loop."""
    n = len(y)
    if m % 2 == 0:
        w = [0.5 / m] + [1.0 / m] * (m - 1) + [0.5 / m]
    else:
        w = [1.0 / m] * m
    half = len(w) // 2
    trend = [None] * n
    for t in range(half, n - half):
        trend[t] = sum(wj * y[t - half + j] for j, wj in enumerate(w))
    ratios = [[] for _ in range(m)]
    for t in range(n):
        if trend[t] is not None and trend[t] != 0:
            ratios[t % m].append(y[t] / trend[t])
    figure = [sum(r) / len(r) for r in ratios]
    mean_fig = sum(figure) / m
    return [f / mean_fig for f in figure]


class TestNaive2:
    def test_constant_series(self):
        assert naive2(np.full(40, 7.0), 12, 5).tolist() == [7.0] * 5

    def test_nonseasonal_is_last_value(self):
        rng = np.random.default_rng(1)
        y = rng.uniform(50, 60, 40)  # white level noise, no seasonality
        assert not seasonality_test(y, 12)
        assert naive2(y, 12, 6).tolist() == [y[-1]] * 6

    def test_short_series_gate_closed(self):
        # Strongly seasonal but under three full cycles: plain naive regardless.
        t = np.arange(35)
        y = 100 + 50 * np.sin(2 * np.pi * t / 12)
        assert naive2(y, 12, 4).tolist() == [y[-1]] * 4

    def test_exactly_multiplicative_series_reproduced(self):
        factors = np.array([0.8, 1.2, 0.9, 1.1, 1.0, 0.7, 1.3, 0.95, 1.05, 0.85, 1.15, 1.0])
        y = 100.0 * np.tile(factors, 4)
        assert seasonality_test(y, 12)
        fc = naive2(y, 12, 12)
        si = seasonal_indices(y, 12)
        ref = reference_seasonal_indices(list(y), 12)
        assert np.allclose(si, ref, rtol=1e-12)
        # last deseasonalized value is the constant level, so the forecast
        # repeats the seasonal pattern
        expected = (y[-1] / si[47 % 12]) * si[np.arange(48, 60) % 12]
        assert np.allclose(fc, expected, rtol=1e-12)
        assert np.allclose(fc, 100.0 * factors, rtol=1e-6)

    def test_seasonality_gate_matches_reference_formula(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            t = np.arange(48)
            amp = rng.uniform(0, 30)
            y = 100 + amp * np.sin(2 * np.pi * t / 12) + rng.normal(0, 5, 48)
            # independent acf computation
            dev = y - y.mean()
            c0 = float(np.dot(dev, dev))
            acfs = [float(np.dot(dev[: len(y) - k], dev[k:]) / c0) for k in range(1, 13)]
            crit = 1.645 * np.sqrt((1 + 2 * sum(a * a for a in acfs[:11])) / len(y))
            assert seasonality_test(y, 12) == (abs(acfs[11]) > crit)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            naive2(np.array([1.0, np.inf, 2.0]), 12, 3)


class TestOwa:
    def test_self_reference_is_one(self):
        assert owa(10.0, 1.0, 10.0, 1.0).owa == 1.0

    def test_double_everything_is_two(self):
        assert owa(20.0, 2.0, 10.0, 1.0).owa == 2.0

    def test_reported_aggregate_consistency(self):
        # 0.5*(8.22/s + 0.49/m) = 0.58 for the inferred reference aggregates
        s_ref = 14.2
        m_ref = 0.49 / (2 * 0.58 - 8.22 / s_ref)
        assert owa(8.22, 0.49, s_ref, m_ref).owa == pytest.approx(0.58, abs=1e-12)

    def test_zero_reference_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            owa(1.0, 1.0, 0.0, 1.0)

    @given(st.floats(0.1, 100), st.floats(0.1, 10), st.floats(0.1, 100), st.floats(0.1, 10))
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force(self, s, m, s2, m2):
        assert owa(s, m, s2, m2).owa == pytest.approx(owa_brute(s, m, s2, m2), rel=1e-12)


class TestEvaluatePanel:
    def _panel(self, rows, period=12):
        values = np.asarray(rows, dtype=float)
        ids = tuple(f"s{i}" for i in range(values.shape[0]))
        return SeriesMatrix(values, np.ones(values.shape, dtype=bool), ids, period)

    def test_degenerate_series_kept_out_of_aggregates(self):
        t = np.arange(36, dtype=float)
        lively = 100 + 10 * np.sin(2 * np.pi * t / 12) + t
        flat = np.tile(np.array([5.0, 7.0, 9.0] * 4), 3)  # period-12 exact repeats
        train = self._panel([lively[:24], flat[:24]])
        test = self._panel([lively[24:36], flat[24:36]])
        forecasts = np.vstack([lively[24:36] + 1.0, flat[24:36]])
        report = evaluate_panel(train, test, forecasts)
        assert report.n_degenerate == 1
        assert report.scores[1].degenerate and report.scores[1].mase is None
        assert report.scores[0].mase is not None
        assert report.aggregate.owa > 0

    def test_category_breakdown_and_json(self, tmp_path):
        rng = np.random.default_rng(5)
        rows = rng.uniform(50, 150, size=(4, 36))
        train = self._panel(rows[:, :24])
        test = self._panel(rows[:, 24:])
        cats = {"s0": "Micro", "s1": "Micro", "s2": "Macro", "s3": "Macro"}
        report = evaluate_panel(train, test, rows[:, 24:], categories=cats)
        assert set(report.by_category) == {"Micro", "Macro"}
        path = tmp_path / "eval.json"
        report.save(path)
        payload = json.loads(path.read_text())
        assert payload["aggregate"]["n_series"] == 4
        assert {row["id"] for row in payload["series"]} == {"s0", "s1", "s2", "s3"}
        assert payload["series"][0]["category"] == "Micro"

    def test_shared_reference_matches_internal(self):
        rng = np.random.default_rng(9)
        rows = rng.uniform(50, 150, size=(3, 40))
        train, test = self._panel(rows[:, :28]), self._panel(rows[:, 28:])
        fc = rows[:, 28:] * 1.05
        ref = np.vstack([naive2(rows[i, :28], 12, 12) for i in range(3)])
        a = evaluate_panel(train, test, fc)
        b = evaluate_panel(train, test, fc, reference=ref)
        assert a.aggregate.owa == pytest.approx(b.aggregate.owa, rel=1e-12)
