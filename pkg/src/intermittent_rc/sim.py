"""Closed-loop simulation of RC with intermittently sampled error, and metrics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import HorizonTooShort, IllPosedLoop, InvalidInput, TooFewStamps
from .lti import StreamingFilter, TransferFunction
from .repetitive import make_controller
from .timestamping import TimestampGenerator, TimestampSet, generate

OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class Harmonic:
    """``amplitude * sin(omega*k + phase)``; omega from ``index`` or given."""

    amplitude: float
    phase: float = 0.0
    index: float | None = None
    omega: float | None = None

    def __post_init__(self):
        if (self.index is None) == (self.omega is None):
            raise InvalidInput("harmonic needs exactly one of index or omega")
        if not math.isfinite(self.amplitude):
            raise InvalidInput("harmonic amplitude must be finite")


@dataclass(frozen=True)
class Disturbance:
    period: float
    harmonics: tuple = ()

    def __post_init__(self):
        if not self.period > 0:
            raise InvalidInput("disturbance period must be positive")
        object.__setattr__(self, "harmonics", tuple(self.harmonics))

    def omegas(self) -> list:
        return [
            h.omega if h.omega is not None else 2 * np.pi * h.index / self.period
            for h in self.harmonics
        ]

    @property
    def amplitude(self) -> float:
        return float(sum(abs(h.amplitude) for h in self.harmonics))

    def signal(self, horizon: int) -> np.ndarray:
        k = np.arange(horizon, dtype=float)
        v = np.zeros(horizon)
        for h, w in zip(self.harmonics, self.omegas()):
            v += h.amplitude * np.sin(w * k + h.phase)
        return v


@dataclass(frozen=True)
class Scenario:
    plant: TransferFunction
    disturbance: Disturbance
    controller: object
    timestamps: TimestampGenerator
    horizon: int
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 10 * self.disturbance.period:
            raise InvalidInput("horizon must cover at least 10 disturbance periods")


@dataclass
class SimResult:
    e: np.ndarray
    ebar: np.ndarray
    u: np.ndarray
    y: np.ndarray
    v: np.ndarray
    psi: TimestampSet
    metrics: dict = field(default_factory=dict)
    diverged: bool = False


def realize_timestamps(scn: Scenario) -> TimestampSet:
    gen = scn.timestamps
    if gen.is_random:
        gen = replace(gen, seed=scn.seed)
    return generate(gen, scn.horizon)


def run_closed_loop(scn: Scenario, settle_periods: int = 0) -> SimResult:
    """Simulate the sampled RC loop sample by sample.

    Per step: the strictly proper plant produces ``y(k)`` from past inputs,
    ``e = y + v``, the sampler passes ``e`` only at timestamps, and the
    controller output enters the plant with negative sign. A run whose error
    exceeds the overflow guard is stopped; the remaining samples are NaN.
    """
    plant = scn.plant
    if not plant.is_strictly_proper:
        raise IllPosedLoop("plant must be strictly proper for a well-posed loop")
    K = scn.horizon
    psi = realize_timestamps(scn)
    sampled = psi.mask().tolist()
    v = scn.disturbance.signal(K)
    pf = StreamingFilter.from_tf(plant)
    ctrl = make_controller(scn.controller)
    e = np.full(K, np.nan)
    y = np.full(K, np.nan)
    u = np.full(K, np.nan)
    eb = np.full(K, np.nan)
    diverged = False
    vl = v.tolist()
    for k in range(K):
        yk = pf.peek()
        ek = yk + vl[k]
        if not abs(ek) <= OVERFLOW_GUARD:
            diverged = True
            break
        ebk = ek if sampled[k] else 0.0
        uk = -ctrl.step(ebk)
        pf.step(uk)
        y[k], e[k], eb[k], u[k] = yk, ek, ebk, uk
    res = SimResult(e, eb, u, y, v, psi, diverged=diverged)
    if not diverged:
        res.metrics = reduction_metrics(res, scn.disturbance, settle_periods)
    res.metrics["max_abs_e"] = float(np.nanmax(np.abs(e))) if np.any(np.isfinite(e)) else float("nan")
    res.metrics["diverged"] = diverged
    return res


def rms_moving_window(e, window: int) -> np.ndarray:
    """Windowed RMS over the last ``window`` samples (available prefix early on)."""
    if window < 1:
        raise InvalidInput("window must be >= 1")
    e = np.asarray(e, dtype=float)
    sq = np.convolve(e * e, np.ones(window))[: e.size]
    count = np.minimum(np.arange(1, e.size + 1), window)
    return np.sqrt(np.maximum(sq, 0.0) / count)


def interpolate_to_grid(psi: TimestampSet, values) -> np.ndarray:
    """Linear interpolation of stamp values onto ``0..horizon-1``.

    ``values`` may hold one value per stamp or a full-length record (then
    only the stamped samples are used). Held constant outside the stamps.
    """
    if len(psi) < 2:
        raise TooFewStamps("need at least two timestamps")
    values = np.asarray(values, dtype=float)
    if values.size == psi.horizon and values.size != len(psi):
        values = values[psi.stamps]
    if values.size != len(psi):
        raise InvalidInput("one value per timestamp required")
    return np.interp(np.arange(psi.horizon), psi.stamps, values)


def cumulative_amplitude_spectrum(e, sample_time: float = 1.0):
    """Single-sided DFT amplitude spectrum and its running sum.

    Returns ``(freqs_hz, amplitude, cumulative)``.
    """
    e = np.asarray(e, dtype=float)
    K = e.size
    if K < 2:
        raise InvalidInput("need at least two samples")
    amp = np.abs(np.fft.rfft(e)) / K
    amp[1:] *= 2.0
    if K % 2 == 0:
        amp[-1] /= 2.0
    freqs = np.fft.rfftfreq(K, d=sample_time)
    return freqs, amp, np.cumsum(amp)


def sinusoid_amplitudes(x, omegas, start: int = 0) -> np.ndarray:
    """Least-squares amplitudes of ``x`` at ``omegas`` (with an offset term)."""
    x = np.asarray(x, dtype=float)
    k = np.arange(start, start + x.size, dtype=float)
    cols = [np.ones_like(k)]
    for w in omegas:
        cols += [np.cos(w * k), np.sin(w * k)]
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, x, rcond=None)
    return np.hypot(coef[1::2], coef[2::2])


def _rms(x) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def reduction_metrics(result: SimResult, disturbance: Disturbance, settle_periods: int = 0,
                      window: int | None = None) -> dict:
    """Initial versus converged error over one-period windows.

    ``initial`` is the first window, ``converged`` the last; the converged
    window must start after ``settle_periods`` periods.
    """
    window = window or int(math.ceil(disturbance.period))
    K = result.e.size
    if K < (settle_periods + 1) * window or K < 2 * window:
        raise HorizonTooShort("horizon too short for the requested windows")
    first, last = result.e[:window], result.e[K - window:]
    r0, r1 = _rms(first), _rms(last)
    if r1 > 0:
        factor = r0 / r1
    else:
        factor = math.inf if r0 > 0 else 1.0
    omegas = disturbance.omegas()
    amps = []
    if omegas:
        # least-squares fits need a few periods of the slowest component
        span = max(window, int(math.ceil(4 * 2 * np.pi / min(omegas))))
        span = min(span, K // 2)
        a0 = sinusoid_amplitudes(result.e[:span], omegas, 0)
        a1 = sinusoid_amplitudes(result.e[K - span:], omegas, K - span)
        for w, i0, i1 in zip(omegas, a0, a1):
            amps.append({
                "omega": float(w),
                "initial": float(i0),
                "converged": float(i1),
                "ratio": float(i0 / i1) if i1 > 0 else math.inf,
            })
    return {
        "initial_rms": r0,
        "converged_rms": r1,
        "reduction_factor": factor,
        "amplitudes": amps,
    }


# export ---------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def write_sim_csv(res: SimResult, path) -> None:
    mask = res.psi.mask()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "v", "y", "e", "ebar", "u", "sampled"])
        for k in range(res.e.size):
            w.writerow([k, _fmt(res.v[k]), _fmt(res.y[k]), _fmt(res.e[k]), _fmt(res.ebar[k]),
                        _fmt(res.u[k]), int(mask[k])])


def write_spectrum_csv(freqs, amp, cum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_hz", "amplitude", "cumulative"])
        for row in zip(freqs, amp, cum):
            w.writerow([_fmt(x) for x in row])


def write_metrics_json(metrics: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
