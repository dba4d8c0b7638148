import csv
import json

import numpy as np
import pytest

from intermittent_rc.errors import HorizonTooShort, IllPosedLoop, InvalidInput, TooFewStamps
from intermittent_rc.lti import TransferFunction, sensitivity, simulate, zpetc_inverse
from intermittent_rc.repetitive import RcConfig, controller_transfer
from intermittent_rc.sim import (
    Disturbance,
    Harmonic,
    Scenario,
    SimResult,
    cumulative_amplitude_spectrum,
    interpolate_to_grid,
    reduction_metrics,
    rms_moving_window,
    run_closed_loop,
    write_metrics_json,
    write_sim_csv,
    write_spectrum_csv,
)
from intermittent_rc.timestamping import TimestampGenerator, TimestampSet, apply_T

N = 50
DIST = Disturbance(N, (Harmonic(1.0, 0.3, index=1), Harmonic(0.5, 1.0, index=3)))


@pytest.fixture
def classic(plant):
    return RcConfig(N, zpetc_inverse(plant), TransferFunction([0.99995]), 1.0)


def scenario(plant, cfg, kind="all", p=1.0, horizon=20 * N, seed=0, dist=DIST):
    return Scenario(plant, dist, cfg, TimestampGenerator(kind, p=p), horizon, seed)


def test_zero_disturbance(plant, classic):
    res = run_closed_loop(scenario(plant, classic, dist=Disturbance(N, ())))
    assert not np.any(res.e) and not np.any(res.u)


def test_no_stamps_means_open_loop(plant, classic):
    res = run_closed_loop(scenario(plant, classic, kind="none"))
    assert not np.any(res.u)
    assert np.array_equal(res.e, res.v)


def test_loop_identities(plant, classic):
    res = run_closed_loop(scenario(plant, classic, kind="bernoulli", p=0.4, seed=9))
    assert np.array_equal(res.e, res.y + res.v)
    assert np.array_equal(res.ebar, apply_T(res.e, res.psi))
    tilde = res.e - res.ebar
    assert not np.any(res.ebar * tilde)


def test_full_sampling_matches_lti_loop(plant, classic):
    res = run_closed_loop(scenario(plant, classic))
    S = sensitivity(plant, controller_transfer(classic))
    ref = simulate(S, res.v)
    assert np.max(np.abs(res.e - ref)) <= 1e-10


def test_full_sampling_converges(plant):
    cfg = RcConfig(N, zpetc_inverse(plant), TransferFunction([1.0]))
    res = run_closed_loop(scenario(plant, cfg, horizon=50 * N))
    assert np.max(np.abs(res.e[-N:])) <= 1e-9 * DIST.amplitude
    assert res.metrics["reduction_factor"] >= 1e3


def test_determinism(plant, classic):
    a = run_closed_loop(scenario(plant, classic, kind="bernoulli", p=0.5, seed=4))
    b = run_closed_loop(scenario(plant, classic, kind="bernoulli", p=0.5, seed=4))
    for f in ("e", "ebar", "u", "y", "v"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert a.psi == b.psi


def test_scenario_seed_drives_timestamps(plant, classic):
    a = run_closed_loop(scenario(plant, classic, kind="bernoulli", p=0.5, seed=1))
    b = run_closed_loop(scenario(plant, classic, kind="bernoulli", p=0.5, seed=2))
    assert a.psi != b.psi


def test_ill_posed_loop(classic):
    with pytest.raises(IllPosedLoop):
        run_closed_loop(scenario(TransferFunction([1.0, 0.5], [1, -0.5]), classic))


def test_horizon_must_cover_ten_periods(plant, classic):
    with pytest.raises(InvalidInput):
        scenario(plant, classic, horizon=9 * N)


def test_controller_off_keeps_error(plant):
    cfg = RcConfig(N, zpetc_inverse(plant), TransferFunction([1.0]), 0.0)
    res = run_closed_loop(scenario(plant, cfg))
    assert res.metrics["reduction_factor"] == pytest.approx(1.0, abs=1e-9)


def test_divergence_is_flagged(plant):
    # Q = 1, large gain, no inverse: the buffer loop violates the small-gain test
    cfg = RcConfig(N, TransferFunction([0, 0, 8.0]), TransferFunction([1.0]))
    res = run_closed_loop(scenario(plant, cfg, horizon=200 * N))
    assert res.diverged and res.metrics["diverged"]
    k = np.flatnonzero(np.isnan(res.e))[0]
    assert np.all(np.isnan(res.e[k:]))


def test_stability_consistency_over_seeds(plant, classic):
    # small-gain design: bounded and end window below start window for every seed
    for seed in range(20):
        res = run_closed_loop(scenario(plant, classic, kind="bernoulli", p=0.5, seed=seed))
        assert res.metrics["max_abs_e"] <= 100 * DIST.amplitude
        rms = rms_moving_window(res.e, N)
        assert rms[-1] <= rms[N - 1]


# metrics ----------------------------------------------------------------


def test_rms_examples():
    assert np.allclose(rms_moving_window(np.full(10, -3.0), 4), 3.0)
    assert not np.any(rms_moving_window(np.zeros(5), 2))
    imp = np.zeros(7)
    imp[0] = 1.0
    ref = [1, 1 / np.sqrt(2), 1 / np.sqrt(3), 0.5, 0, 0, 0]
    assert np.allclose(rms_moving_window(imp, 4), ref, atol=1e-15)
    with pytest.raises(InvalidInput):
        rms_moving_window(imp, 0)


def test_interpolate_examples():
    x = np.arange(5.0) ** 2
    assert np.array_equal(interpolate_to_grid(TimestampSet.all(5), x), x)
    assert interpolate_to_grid(TimestampSet([0, 2], 3), [0.0, 2.0]).tolist() == [0, 1, 2]
    assert interpolate_to_grid(TimestampSet([1, 2], 4), [5.0, 7.0]).tolist() == [5, 5, 7, 7]
    with pytest.raises(TooFewStamps):
        interpolate_to_grid(TimestampSet([1], 4), [1.0])


def test_interpolation_error_bound():
    rng = np.random.default_rng(8)
    K = 400
    x = np.cumsum(np.cumsum(rng.normal(size=K))) * 1e-2
    mask = rng.uniform(size=K) < 0.3
    mask[[0, -1]] = True
    psi = TimestampSet.from_mask(mask)
    est = interpolate_to_grid(psi, x[psi.stamps])
    gap = np.max(np.diff(psi.stamps))
    bound = gap**2 / 8 * np.max(np.abs(np.diff(x, 2)))
    assert np.max(np.abs(est - x)) <= bound + 1e-12


def test_spectrum_examples():
    f, a, c = cumulative_amplitude_spectrum(np.zeros(64))
    assert not np.any(c)
    K, A, b = 256, 0.7, 12
    e = A * np.sin(2 * np.pi * b * np.arange(K) / K + 0.4)
    f, a, c = cumulative_amplitude_spectrum(e, sample_time=0.001)
    assert a[b] == pytest.approx(A, abs=1e-12)
    assert np.max(np.abs(np.delete(a, b))) <= 1e-12
    assert f[b] == pytest.approx(b / (K * 0.001))
    assert c[-1] == pytest.approx(a.sum())
    assert np.allclose(c[:b], 0, atol=1e-12) and np.allclose(c[b:], A, atol=1e-12)


def test_spectrum_dc_and_nyquist_not_doubled():
    K = 8
    e = 2.0 + 0.5 * (-1.0) ** np.arange(K)
    _, a, _ = cumulative_amplitude_spectrum(e)
    assert a[0] == pytest.approx(2.0) and a[-1] == pytest.approx(0.5)


def test_reduction_metrics_amplitudes():
    K = 2000
    k = np.arange(K)
    w = 2 * np.pi / 37.3
    decay = np.where(k < K // 2, 1.0, 0.01)
    e = decay * np.sin(w * k)
    res = SimResult(e, e, 0 * e, e, e, TimestampSet.all(K))
    d = Disturbance(37.3, (Harmonic(1.0, index=1),))
    m = reduction_metrics(res, d)
    assert m["amplitudes"][0]["ratio"] == pytest.approx(100, rel=1e-6)
    assert m["reduction_factor"] == pytest.approx(100, rel=1e-2)
    with pytest.raises(HorizonTooShort):
        reduction_metrics(res, d, settle_periods=100)


def test_exports(tmp_path, plant, classic):
    res = run_closed_loop(scenario(plant, classic, kind="periodic"))
    write_sim_csv(res, tmp_path / "s.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["k", "v", "y", "e", "ebar", "u", "sampled"]
    assert len(rows) == res.e.size + 1
    write_metrics_json(res.metrics, tmp_path / "m.json")
    assert "reduction_factor" in json.loads((tmp_path / "m.json").read_text())
    write_spectrum_csv(*cumulative_amplitude_spectrum(res.e), tmp_path / "f.csv")
    assert open(tmp_path / "f.csv").readline().strip() == "omega_hz,amplitude,cumulative"
