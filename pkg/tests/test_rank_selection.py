import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentcast.rank_selection import ElbowCurve, pick_elbow, sweep
from latentcast.synthetic import exact_rank_panel
from latentcast.trmf import TrmfConfig, TrmfError


class TestPickElbow:
    def test_hand_computed_chord_distances(self):
        curve = ElbowCurve((1, 2, 3, 4, 5), (10.0, 2.0, 1.9, 1.8, 1.7))
        assert pick_elbow(curve) == 2

    def test_linear_curve_flagged_smallest(self):
        curve = ElbowCurve((1, 2, 3, 4), (8.0, 6.0, 4.0, 2.0))
        with pytest.warns(UserWarning, match="straight line"):
            assert pick_elbow(curve) == 1

    def test_flat_curve_flagged_smallest(self):
        curve = ElbowCurve((2, 4, 6), (3.0, 3.0, 3.0))
        with pytest.warns(UserWarning, match="flat"):
            assert pick_elbow(curve) == 2

    def test_too_few_points_refused(self):
        with pytest.raises(ValueError, match=">= 3"):
            pick_elbow(ElbowCurve((1, 2), (5.0, 1.0)))

    @given(st.floats(0.01, 50.0), st.floats(-10.0, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_affine_error_rescaling_invariance(self, a, b):
        errors = (10.0, 4.0, 2.5, 2.2, 2.1, 2.05)
        ks = (2, 4, 6, 8, 10, 12)
        base = pick_elbow(ElbowCurve(ks, errors))
        scaled = pick_elbow(ElbowCurve(ks, tuple(a * e + b for e in errors)))
        assert base == scaled

    def test_flat_tail_extension_invariance(self):
        # a sharp single-drop curve: the regime the heuristic is meant for
        ks = (1, 2, 3, 4, 5)
        errors = (10.0, 2.0, 1.9, 1.8, 1.7)
        base = pick_elbow(ElbowCurve(ks, errors))
        extended = pick_elbow(ElbowCurve(ks + (6, 7, 8), errors + (1.7, 1.7, 1.7)))
        assert base == extended == 2

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError, match="matching"):
            ElbowCurve((1, 2, 3), (1.0, 2.0))

    def test_unordered_ranks_rejected(self):
        with pytest.raises(ValueError, match="ascending"):
            ElbowCurve((3, 1, 2), (1.0, 2.0, 3.0))


class TestSweep:
    def test_recovers_planted_rank_region(self):
        panel = exact_rank_panel(24, 60, rank=3, noise=0.01, seed=0)
        cfg = TrmfConfig(lags=(1, 2), lambda_f=1e-4, lambda_x=1e-4,
                         lambda_theta=1e-6, eta=0.01, max_iterations=150,
                         tolerance=1e-8, seed=0)
        curve = sweep(panel, range(1, 9), cfg)
        errors = np.array(curve.errors)
        # errors fall sharply up to the true rank, then flatten
        assert errors[0] > errors[2] * 3
        assert pick_elbow(curve) in (2, 3, 4)

    def test_errors_nonincreasing_up_to_solver_noise(self):
        panel = exact_rank_panel(16, 40, rank=3, noise=0.05, seed=5)
        cfg = TrmfConfig(lags=(1,), lambda_f=1e-4, lambda_x=1e-4,
                         lambda_theta=1e-6, eta=0.01, max_iterations=120,
                         tolerance=1e-8, seed=1)
        curve = sweep(panel, (1, 2, 3, 5, 7), cfg)
        errors = np.array(curve.errors)
        assert np.all(errors[1:] <= errors[:-1] * 1.05)

    def test_rank_must_stay_below_min_dimension(self):
        panel = exact_rank_panel(6, 40, rank=2, seed=2)
        with pytest.raises(ValueError, match="min\\(N, T\\)"):
            sweep(panel, [6], TrmfConfig(rank=6))

    def test_solver_failure_annotated_with_rank(self):
        panel = exact_rank_panel(8, 10, rank=2, seed=3)
        bad = TrmfConfig(lags=(1, 2, 3, 4, 5, 6, 7, 8, 9), max_iterations=5)
        with pytest.raises(TrmfError, match="rank 2"):
            sweep(panel, [2, 3], bad)

    def test_workers_do_not_change_results(self):
        panel = exact_rank_panel(10, 30, rank=2, noise=0.02, seed=8)
        cfg = TrmfConfig(lags=(1,), max_iterations=40, seed=0)
        sequential = sweep(panel, (1, 2, 3, 4), cfg, workers=1)
        threaded = sweep(panel, (1, 2, 3, 4), cfg, workers=4)
        assert sequential.errors == threaded.errors

    def test_csv_roundtrip(self, tmp_path):
        curve = ElbowCurve((2, 4, 6), (3.5, 1.25, 1.0))
        path = tmp_path / "elbow.csv"
        curve.to_csv(path)
        back = ElbowCurve.from_csv(path)
        assert back == curve
