import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentcast.forecasters import (
    DEFAULT_METHODS,
    METHOD_CATALOG,
    BoxCoxForecaster,
    MethodInapplicable,
    MethodMenu,
    NaiveForecaster,
    boxcox_inverse,
    boxcox_lambda,
    boxcox_transform,
    default_menu,
    fit_predict,
)

ALL_NAMES = tuple(METHOD_CATALOG)


def forecast(name, history, h, period=12):
    return fit_predict(METHOD_CATALOG[name](), np.asarray(history, dtype=float), h, period)


class TestBasicMethods:
    def test_naive_repeats_last(self):
        assert forecast("naive", [1.0, 5.0, 7.0], 3).tolist() == [7.0, 7.0, 7.0]

    def test_mean_is_average(self):
        assert forecast("mean", [2.0, 4.0], 2).tolist() == [3.0, 3.0]

    def test_drift_extends_endpoint_slope(self):
        got = forecast("drift", [0.0, 1.0, 2.0, 3.0], 2)
        assert got.tolist() == [4.0, 5.0]

    def test_seasonal_naive_exact_continuation(self):
        cycle = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0]
        history = cycle * 4
        got = forecast("seasonal_naive", history, 24, period=12)
        assert got.tolist() == cycle * 2

    def test_seasonal_naive_needs_one_cycle(self):
        with pytest.raises(MethodInapplicable):
            forecast("seasonal_naive", [1.0] * 11, 3, period=12)

    def test_ar1_coefficient_recovery(self):
        rng = np.random.default_rng(0)
        y = np.zeros(60)
        for t in range(1, 60):
            y[t] = 0.8 * y[t - 1] + rng.normal(0, 0.05)
        model = METHOD_CATALOG["ar"](max_order=1).fit(y, 1)
        assert model.order_ == 1
        # closed-form least squares on the same data is the reference
        X = np.column_stack([np.ones(59), y[:-1]])
        closed_form = np.linalg.solve(X.T @ X, X.T @ y[1:])
        assert model.coef_[1] == pytest.approx(closed_form[1], rel=1e-9)
        assert model.coef_[1] == pytest.approx(0.8, abs=0.1)

    def test_ar_pure_tone_locked(self):
        t = np.arange(60, dtype=float)
        y = 10 + np.sin(2 * np.pi * t / 8)
        got = forecast("ar", y, 12)
        expected = 10 + np.sin(2 * np.pi * (60 + np.arange(12)) / 8)
        assert np.allclose(got, expected, atol=1e-6)

    def test_holt_extrapolates_exact_line(self):
        y = 3.0 + 0.5 * np.arange(30)
        got = forecast("holt", y, 4)
        assert np.allclose(got, 3.0 + 0.5 * (30 + np.arange(4)), atol=1e-8)

    def test_hw_additive_exact_trend_season(self):
        t = np.arange(48, dtype=float)
        season = np.tile([5.0, -3.0, 1.0, -1.0, 4.0, -2.0, 0.0, 2.0, -4.0, 3.0, -2.0, -3.0], 4)
        y = 50 + 0.5 * t + season
        got = forecast("hw_additive", y, 12)
        expected = 50 + 0.5 * (48 + np.arange(12)) + season[:12]
        assert np.allclose(got, expected, atol=0.3)

    def test_hw_multiplicative_requires_positive(self):
        y = np.sin(np.arange(48.0)) * 10
        with pytest.raises(MethodInapplicable):
            forecast("hw_multiplicative", y, 3)

    def test_theta_flat_on_detrended_level(self):
        rng = np.random.default_rng(0)
        y = 20 + rng.normal(0, 0.1, 40)
        got = forecast("theta", y, 3)
        assert np.allclose(got, 20, atol=1.0)


class TestContract:
    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_constant_series_forecasts_constant(self, name):
        got = forecast(name, [6.0] * 30, 5)
        assert np.allclose(got, 6.0, atol=1e-7)

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_length_and_finiteness(self, name):
        rng = np.random.default_rng(hash(name) % 2**32)
        y = rng.uniform(10, 50, 40)
        for h in (1, 7, 13):
            got = forecast(name, y, h)
            assert got.shape == (h,)
            assert np.all(np.isfinite(got))

    @pytest.mark.parametrize("name", ALL_NAMES)
    def test_bitwise_determinism(self, name):
        rng = np.random.default_rng(7)
        y = rng.uniform(5, 25, 36)
        a = forecast(name, y, 6)
        b = forecast(name, y.copy(), 6)
        assert np.array_equal(a, b)

    def test_too_short_history_inapplicable(self):
        with pytest.raises(MethodInapplicable):
            forecast("holt", [1.0, 2.0], 3)

    def test_predict_before_fit(self):
        with pytest.raises(RuntimeError, match="before fit"):
            NaiveForecaster().predict(3)

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            forecast("naive", [1.0], 0)


class TestBoxCox:
    def test_constant_series_roundtrips_exactly(self):
        y = np.full(24, 9.0)
        lam = boxcox_lambda(y, 12)
        assert np.allclose(boxcox_inverse(boxcox_transform(y, lam), lam), y, rtol=1e-12)

    def test_exponential_growth_picks_lambda_near_zero(self):
        y = 5.0 * np.exp(0.08 * np.arange(48))
        lam = boxcox_lambda(y, 12)
        grid = np.linspace(-1, 2, 301)

        def cv(l):
            blocks = y[: 48 - 48 % 12].reshape(-1, 12)
            m, s = blocks.mean(axis=1), blocks.std(axis=1, ddof=1)
            r = s / m ** (1 - l)
            return r.std(ddof=1) / r.mean()

        best_grid = grid[int(np.argmin([cv(l) for l in grid]))]
        assert abs(lam - best_grid) < 0.05
        assert abs(lam) < 0.25

    @given(st.integers(0, 2**31))
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_random_positive_vectors(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.uniform(0.1, 1e3, size=rng.integers(4, 40))
        lam = float(rng.uniform(-1, 2))
        back = boxcox_inverse(boxcox_transform(y, lam), lam)
        assert np.max(np.abs(back - y) / y) < 1e-9

    def test_nonpositive_inapplicable(self):
        with pytest.raises(MethodInapplicable):
            fit_predict(BoxCoxForecaster(NaiveForecaster()), np.array([1.0, -2.0] * 4), 2, 1)

    @pytest.mark.parametrize("name", ["naive", "mean", "drift", "ses", "holt", "theta", "ar"])
    def test_lambda_one_matches_unwrapped(self, name):
        # lambda = 1 is the shift y - 1; shift-equivariant methods are unchanged
        rng = np.random.default_rng(11)
        y = rng.uniform(10, 30, 36)
        wrapped = fit_predict(BoxCoxForecaster(METHOD_CATALOG[name](), lam=1.0), y, 6, 12)
        plain = forecast(name, y, 6)
        assert np.allclose(wrapped, plain, atol=1e-9)


class TestMenu:
    def test_default_menu_size_and_uniqueness(self):
        menu = default_menu()
        assert len(menu.names) >= 8
        assert len(set(menu.names)) == len(menu.names)
        assert menu.names == DEFAULT_METHODS

    def test_unknown_method_rejected(self):
        with pytest.raises(KeyError, match="unknown method"):
            MethodMenu.from_names(["naive", "oracle9000", "mean", "ses"])

    def test_overrides_reach_factory(self):
        menu = MethodMenu.from_names(["mean", "naive", "ses", "ar"], {"ar": {"max_order": 2}})
        assert menu.make("ar").max_order == 2

    def test_external_method_registration(self):
        class Flat(NaiveForecaster):
            name = "flat42"

            def fit(self, y, period=1):
                self.level_ = 42.0
                self._fitted = True
                return self

        menu = default_menu().with_method("flat42", Flat)
        assert "flat42" in menu.names
        assert fit_predict(menu.make("flat42"), np.ones(5), 2, 1).tolist() == [42.0, 42.0]

    def test_too_small_menu_rejected(self):
        with pytest.raises(ValueError, match="at least 4"):
            MethodMenu.from_names(["mean", "naive"])
