"""Smoke tests for the python overlay: the bindings import and the core
numerics behave identically to the C++ suite's anchors."""

import math

import idealband as ib


def test_version_and_constants():
    assert ib.__version__ == "1.0.0"
    assert ib.DEFAULT_SEED == 1729
    assert ib.MIN_RADIUS == 1e-6

def test_sigmoid_anchor():
    assert ib.sigmoid(0.0) == 0.5
    assert math.isclose(ib.sigmoid(3.0), 0.9525741268224334, rel_tol=0, abs_tol=1e-15)

def test_band_response_peaks_at_one():
    window = ib.PropensityWindow(-1.0, 2.0, 1.0)
    assert ib.p_propensity(window.midpoint(), window) == 1.0
    assert ib.p_propensity(window.midpoint() + 1.0, window) < 1.0

def test_fit_recovers_a_planted_trait():
    dist = ib.WindowDistribution()
    dist.support_min = -5.0
    dist.support_max = 5.0
    dist.n_items = 400
    dist.seed = 7
    windows = ib.sample_windows(dist)
    outcomes = ib.simulate_outcomes(-1.5, windows, 11)
    result = ib.fit_propensity(windows, outcomes)
    assert result.converged
    assert abs(result.theta_hat - (-1.5)) <= 0.3

def test_parse_interval_round_trip():
    window = ib.parse_interval("Done. The propensity range is [-2, 1].")
    assert window.lower_bl == -2.0
    assert window.upper_bu == 1.0

def test_theorem_suite_passes():
    options = ib.ValidationOptions()
    options.draws = 2000
    report = ib.validate_theorems(options)
    assert report.all_passed
    assert len(report.checks) == 14
