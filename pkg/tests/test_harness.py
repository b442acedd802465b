import math

import numpy as np
import pytest

from polar_ura.codebook import config_from_counts, design_codebook, energy_per_bit, reference_snr_table
from polar_ura.harness import (
    SweepPoint,
    bler_point,
    calibrate_required_snr,
    interference_comparison,
    interference_samples,
    max_admissible_errors,
    pupe,
    required_ebn0,
    run_trials,
    summarize,
    sweep_ebn0,
    system_trial,
    trial_rng,
    wilson_interval,
)
from polar_ura.polar import construct_code
from polar_ura.sic import ReceiverConfig

FAST = ReceiverConfig(list_size=4)


@pytest.fixture(scope="module")
def small_cfg():
    return design_codebook(12, reference_snr_table(), [[1024, 2048]], 6, margin=0.9)


def msgs(*rows):
    return [np.array(r, dtype=np.uint8) for r in rows]


def test_pupe_definition():
    sent = msgs([0, 1], [1, 1], [1, 0], [0, 0])
    assert pupe(sent, sent + msgs([1, 1])) == 0.0
    assert pupe(sent, []) == 1.0
    assert pupe(sent, sent[:3]) == 0.25
    assert pupe([], []) == 0.0


def test_pupe_multiset():
    sent = msgs([1, 0], [1, 0])
    assert pupe(sent, msgs([1, 0])) == 0.5
    assert pupe(sent, msgs([1, 0], [1, 0])) == 0.0


def test_wilson_known_values():
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.05523, abs=1e-4)
    assert hi == pytest.approx(0.17437, abs=1e-4)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    assert wilson_interval(0, 50)[0] == 0.0


def test_ci_halves_at_four_times_trials():
    w1 = np.diff(wilson_interval(50, 1000))[0]
    w4 = np.diff(wilson_interval(200, 4000))[0]
    assert w4 / w1 == pytest.approx(0.5, rel=0.05)


def test_max_admissible_errors_boundary():
    k = max_admissible_errors(2000, 0.05)
    assert wilson_interval(k, 2000)[1] <= 0.05 < wilson_interval(k + 1, 2000)[1]
    assert max_admissible_errors(10, 0.05) == -1


def test_trial_rng_streams_independent():
    a = trial_rng(5, 1, 0).integers(0, 2**62)
    assert a == trial_rng(5, 1, 0).integers(0, 2**62)
    assert a != trial_rng(5, 1, 1).integers(0, 2**62)
    assert a != trial_rng(5, 2, 0).integers(0, 2**62)


def test_system_trial_deterministic(small_cfg):
    a = system_trial(small_cfg, FAST, seed=3, trial=7)
    b = system_trial(small_cfg, FAST, seed=3, trial=7)
    assert a == b
    assert a.k_a == 12


def test_high_power_no_errors(small_cfg):
    res = run_trials(small_cfg, FAST, 50, seed=1, power_scale=10.0)
    assert summarize(res)[0] == 0.0


def test_all_preambles_missed(small_cfg):
    r = system_trial(small_cfg, FAST, seed=0, p_miss=1.0)
    assert r.pupe == 1.0 and r.decoded == 0


def test_missed_preambles_floor_pupe():
    cfg = config_from_counts(100, [{768: 100}], reference_snr_table(), p1=0.5)
    res = run_trials(cfg, FAST, 10, seed=2, p_miss=0.02)
    p, lo, hi = summarize(res)
    assert lo <= 0.02 <= hi or p > 0.02
    assert p > 0


def test_workers_do_not_change_results(small_cfg):
    one = run_trials(small_cfg, FAST, 4, seed=9, workers=1)
    two = run_trials(small_cfg, FAST, 4, seed=9, workers=2)
    assert one == two


def test_multinomial_mode_runs(small_cfg):
    r = system_trial(small_cfg, FAST, seed=4, mode="multinomial")
    assert r.k_a == 12


def test_sweep_axis_and_monotonicity(small_cfg):
    scales = [0.8, 1.0, 1.6]
    pts = sweep_ebn0(small_cfg, scales, 20, FAST, seed=5)
    base = energy_per_bit(small_cfg)[1]
    for p, s in zip(pts, scales):
        assert p.ebn0_db == pytest.approx(base + 10 * math.log10(s))
    pupes = [p.pupe for p in pts]
    assert pupes == sorted(pupes, reverse=True)


def test_success_counts_grow_with_power(small_cfg):
    totals = []
    for s in (0.8, 1.0, 1.6):
        res = run_trials(small_cfg, FAST, 20, seed=6, power_scale=s)
        totals.append(sum(ok for r in res for _, _, _, ok, _ in r.class_stats))
    assert totals == sorted(totals)


def test_required_ebn0_selection():
    pts = [SweepPoint(1.0, 3.0, 0.2, 0.1, 0.3, 10), SweepPoint(2.0, 6.0, 0.01, 0, 0.05, 10),
           SweepPoint(1.5, 4.8, 0.04, 0, 0.1, 10)]
    assert required_ebn0(pts).scale == 1.5
    assert required_ebn0(pts[:1]) is None


def test_bler_point_paired_and_chunk_invariant():
    a = bler_point(512, -2.5, 200, 8, seed=1)
    b = bler_point(512, -2.5, 200, 8, seed=1, chunk=37)
    assert a.errors == b.errors and a.trials == 200


def test_calibration_grid_and_dominance():
    r8 = calibrate_required_snr(512, list_size=8, trials=300, seed=2)
    r1 = calibrate_required_snr(512, list_size=1, trials=300, seed=2)
    assert round(r8.required_snr_db * 10) == pytest.approx(r8.required_snr_db * 10)
    assert r1.required_snr_db >= r8.required_snr_db
    grid = {round(p.snr_db, 1): p for p in r8.points}
    passed = grid[round(r8.required_snr_db, 1)]
    failed = grid[round(r8.required_snr_db - 0.1, 1)]
    assert passed.ci[1] <= 0.05 and passed.trials == 300
    assert failed.ci[1] > 0.05
    blers = [p.bler for p in sorted(r8.points, key=lambda p: p.snr_db) if p.trials == 300]
    assert blers == sorted(blers, reverse=True)


def test_calibration_bracket_failure():
    with pytest.raises(RuntimeError):
        calibrate_required_snr(512, list_size=4, trials=100, bracket_db=(-9.0, -8.0))
    with pytest.raises(RuntimeError):
        calibrate_required_snr(512, list_size=4, trials=100, bracket_db=(5.0, 6.0))


@pytest.mark.parametrize("coded", [False, True])
def test_injected_interference_variance(coded):
    k, n_c, n = 25, 4096, 28000
    con = construct_code(12, 4096, 85, 12, -13.9) if coded else None
    rng = np.random.default_rng(0)
    x = np.concatenate([interference_samples(k, n_c, n, rng, con) for _ in range(36)])
    assert x.size >= 1_000_000
    assert x.var() == pytest.approx(k * n_c / n, rel=0.01)


def test_comparison_baseline_small():
    pts = interference_comparison(1024, (0, 5), (-6.0,), trials=40, list_size=4)
    assert [(p.interferers, p.sinr_db, p.trials) for p in pts] == [(0, -6.0, 40), (5, -6.0, 40)]
    with pytest.raises(ValueError):
        interference_comparison(4096, (50,), (0.0,), trials=1, list_size=1)
