"""Automated RC design for intermittent sampling.

Nominal design first (approximate inverse plus zero-phase low-pass, retried
at lower bandwidth until the buffer-length independent test passes), then
the half-plane test is enforced by shrinking the learning gain and, when
that stops helping, by notching Q where the test fails.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AssumptionViolation,
    DesignExhausted,
    InvalidInput,
    NominalDesignInfeasible,
    UnstablePlant,
)
from .lti import (
    DEFAULT_GRID_SIZE,
    FrfData,
    TransferFunction,
    fir_taps,
    freq_response,
    frequency_grid,
    is_internally_stable,
    poly_response,
    symmetric_fir,
    zero_phase_fir_lowpass,
    zpetc_inverse,
)
from .repetitive import RcConfig, controller_transfer
from .stability import (
    StabilityReport,
    _num_den_response,
    classic_eq14,
    eq6_report,
    passivity_check,
    refine_grid,
    s1_check,
    small_gain_check,
    tr_response,
)


@dataclass(frozen=True)
class DesignSpec:
    plant: TransferFunction
    N: int
    q_cutoff: float
    q_half_order: int
    measured_frf: FrfData | None = None
    alpha_factor: float = 0.9
    alpha_max_iter: int = 40
    alpha_enabled: bool = True
    notch_enabled: bool = True
    notch_depth: float = 0.5
    notch_width: float = 0.3
    notch_max_iter: int = 10
    cutoff_factor: float = 0.8
    cutoff_retries: int = 20
    grid_size: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if not 0 < self.alpha_factor < 1:
            raise InvalidInput("alpha_factor must lie in (0, 1)")
        if not 0 < self.notch_depth < 1:
            raise InvalidInput("notch_depth must lie in (0, 1)")
        if not self.notch_width > 0:
            raise InvalidInput("notch_width must be positive")
        if not 0 < self.q_cutoff <= np.pi:
            raise InvalidInput("q_cutoff must lie in (0, pi]")


@dataclass
class DesignReports:
    reports: dict
    crossover: float | None

    @property
    def passivity(self) -> StabilityReport:
        return self.reports["passivity"]

    @property
    def small_gain(self) -> StabilityReport:
        return self.reports["small_gain"]


@dataclass
class DesignOutcome:
    cfg: RcConfig
    reports: DesignReports
    iterations: list = field(default_factory=list)
    status: str = "success"

    @property
    def n_modifications(self) -> int:
        return sum(1 for it in self.iterations if it["action"] != "initial")


def check_plant(plant: TransferFunction) -> None:
    """Raise if the plant is not stable and strictly proper."""
    if not is_internally_stable(plant):
        raise UnstablePlant(
            "plant stability assumption violated: a pole lies on or outside the unit circle"
        )
    if not plant.is_strictly_proper:
        raise AssumptionViolation(
            "plant strict-properness assumption violated: need num[0] == 0 and no preview"
        )


def _targets(spec: DesignSpec, omegas) -> list:
    out = [freq_response(spec.plant, omegas)]
    if spec.measured_frf is not None:
        out.append(spec.measured_frf)
    return out


def design_nominal(spec: DesignSpec) -> RcConfig:
    """Inverse-based learning filter and the widest Q meeting the small-gain test."""
    check_plant(spec.plant)
    L = zpetc_inverse(spec.plant)
    omegas = frequency_grid(spec.grid_size)
    targets = _targets(spec, omegas)
    cutoff = spec.q_cutoff
    margins = []
    for _ in range(spec.cutoff_retries + 1):
        Q = zero_phase_fir_lowpass(cutoff, spec.q_half_order, spec.plant.sample_time)
        m = min(eq6_report(j, L, Q).s2_margin for j in targets)
        margins.append((cutoff, m))
        if m > 0:
            return RcConfig(spec.N, L, Q, 1.0)
        cutoff *= spec.cutoff_factor
    log = [
        {"iter": i, "alpha": 1.0, "action": f"cutoff={c!r}", "passivity_margin": float("nan"),
         "small_gain_margin": float("nan"), "eq6_margin": m}
        for i, (c, m) in enumerate(margins)
    ]
    raise NominalDesignInfeasible(
        f"small-gain test fails down to cutoff {cutoff / spec.cutoff_factor:.4g}", log
    )


def crossover_frequency(J, R: TransferFunction, omegas) -> float | None:
    """Lowest grid frequency where ``|J R|`` crosses 1."""
    jv = J.values if isinstance(J, FrfData) else freq_response(J, omegas).values
    nR, dR = _num_den_response(R, omegas)
    s = np.sign(np.abs(jv * nR) - np.abs(dR))
    idx = np.flatnonzero(s[1:] != s[:-1])
    if idx.size == 0:
        return None
    return float(omegas[idx[0] + 1])


def evaluate_design(cfg, plant, grid_size: int = DEFAULT_GRID_SIZE) -> DesignReports:
    """All region tests plus the nominal-loop test for one controller and plant.

    ``plant`` is a model (grid refined around the worst points) or FRF data
    (its own grid, flagged grid-certified only).
    """
    R = controller_transfer(cfg)
    if isinstance(plant, FrfData):
        omegas = plant.omegas
    else:
        omegas = frequency_grid(grid_size)
    s1 = s1_check(plant, R, omegas)
    tr = tr_response(plant, R, omegas)
    if not isinstance(plant, FrfData):
        omegas = refine_grid(omegas, tr.values.real)
        omegas = refine_grid(omegas, np.abs(tr_response(plant, R, omegas).values))
        tr = tr_response(plant, R, omegas)
    reports = {
        "passivity": passivity_check(tr, s1),
        "small_gain": small_gain_check(tr, s1),
    }
    if isinstance(cfg, RcConfig):
        jf = plant if isinstance(plant, FrfData) else freq_response(plant, omegas)
        reports["classic_eq6"] = eq6_report(jf, cfg.L, cfg.Q, cfg.alpha)
        reports["classic_eq14"] = classic_eq14(jf, cfg.L, cfg.Q, cfg.N, cfg.alpha, s1)
    return DesignReports(reports, crossover_frequency(plant, R, omegas))


# notch ----------------------------------------------------------------


def _bands(freqs, width, gap):
    """Cluster sorted violation frequencies into bands widened by ``width/2``."""
    freqs = np.sort(np.asarray(freqs, dtype=float))
    if freqs.size == 0:
        return []
    cuts = np.flatnonzero(np.diff(freqs) > gap)
    starts = np.concatenate([[0], cuts + 1])
    ends = np.concatenate([cuts, [freqs.size - 1]])
    return [
        (max(freqs[a] - width / 2, 0.0), min(freqs[b] + width / 2, np.pi))
        for a, b in zip(starts, ends)
    ]


def notch_q(Q: TransferFunction, bands, depth: float, width: float, max_half_order: int):
    """Multiply a symmetric FIR ``Q`` by a zero-phase gain dip over ``bands``.

    The correction is ``C = 1 - (1 - depth) * B / max B`` with ``B`` a sum of
    shifted squared-Hann kernels, so ``B >= 0`` and ``depth <= C <= 1``: the
    magnitude of Q never grows anywhere. Returns ``None`` if the preview
    budget is too small for a kernel of half-order 2.
    """
    h = min(max(2, math.ceil(4 * np.pi / width)), max_half_order // 2)
    if h < 2 or not bands:
        return None
    n = np.arange(-h, h + 1)
    win = 0.5 * (1.0 + np.cos(np.pi * n / (h + 1)))
    win /= win.sum()
    kern = np.convolve(win, win)
    nk = np.arange(-2 * h, 2 * h + 1)
    spacing = np.pi / (2 * (h + 1))
    b = np.zeros(nk.size)
    for lo, hi in bands:
        count = max(2, math.ceil((hi - lo) / spacing) + 1)
        for c in np.linspace(lo, hi, count):
            b += 2.0 * np.cos(c * nk) * kern
    dense = np.linspace(0, np.pi, 8192)
    bmax = np.max(np.real(poly_response(b, dense) * np.exp(1j * dense * 2 * h)))
    corr = -(1.0 - depth) / bmax * b
    corr[2 * h] += 1.0
    corr = 0.5 * (corr + corr[::-1])
    taps = np.convolve(fir_taps(Q), corr)
    taps = 0.5 * (taps + taps[::-1])
    return symmetric_fir(taps, Q.sample_time)


# intermittent design loop ----------------------------------------------


def _assess(cfg: RcConfig, spec: DesignSpec):
    """Worst margins over model and measured data, plus the failing set."""
    plants = [spec.plant] + ([spec.measured_frf] if spec.measured_frf is not None else [])
    pm, sm, s1_ok, viol = np.inf, np.inf, True, []
    for p in plants:
        rep = evaluate_design(cfg, p, spec.grid_size)
        t1 = rep.passivity
        pm = min(pm, t1.s2_margin)
        sm = min(sm, rep.small_gain.s2_margin)
        s1_ok = s1_ok and bool(t1.s1_pass)
        viol.extend(t1.violation_frequencies)
    ok = s1_ok and pm >= 0
    return ok, pm, sm, np.unique(np.asarray(viol, dtype=float))


def design_intermittent(spec: DesignSpec, cfg: RcConfig | None = None) -> DesignOutcome:
    """Modify a nominal design until the half-plane test holds.

    Each failing round first tries ``alpha <- alpha * alpha_factor``; the
    step is kept if it raises the worst passivity margin (or if notching is
    disabled). Otherwise Q is notched over the failing set. Raises
    ``DesignExhausted`` when both options are used up.
    """
    if cfg is None:
        cfg = design_nominal(spec)
    grid = frequency_grid(spec.grid_size)
    ok, pm, sm, viol = _assess(cfg, spec)
    log = [_entry(0, cfg, "initial", pm, sm)]
    alpha_steps = notch_steps = 0
    while not ok:
        budget = cfg.N - 1 - cfg.L.preview - cfg.Q.preview
        can_alpha = spec.alpha_enabled and alpha_steps < spec.alpha_max_iter
        can_notch = spec.notch_enabled and notch_steps < spec.notch_max_iter and budget >= 4
        if can_alpha:
            cand = cfg.with_alpha(cfg.alpha * spec.alpha_factor)
            res = _assess(cand, spec)
            alpha_steps += 1
            if res[1] > pm or not can_notch:
                cfg, (ok, pm, sm, viol) = cand, res
                log.append(_entry(len(log), cfg, "alpha", pm, sm))
                continue
        if can_notch:
            bands = _bands(viol, spec.notch_width, 2 * (grid[1] - grid[0]))
            newq = notch_q(cfg.Q, bands,
                           spec.notch_depth, spec.notch_width, budget)
            notch_steps += 1
            if newq is not None:
                cfg = replace(cfg, Q=newq)
                ok, pm, sm, viol = _assess(cfg, spec)
                log.append(_entry(len(log), cfg, "notch", pm, sm))
                continue
        raise DesignExhausted("no learning gain or notch in the schedule satisfies the half-plane test", log)
    verify = spec.measured_frf if spec.measured_frf is not None else spec.plant
    return DesignOutcome(cfg, evaluate_design(cfg, verify, spec.grid_size), log)


def _entry(i, cfg, action, pm, sm):
    return {
        "iter": i,
        "alpha": cfg.alpha,
        "action": action,
        "passivity_margin": float(pm),
        "small_gain_margin": float(sm),
        "q_half_order": cfg.Q.preview,
    }


def write_iterations_csv(log: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "alpha", "passivity_margin", "small_gain_margin"])
        for it in log:
            w.writerow([it["iter"], repr(float(it["alpha"])), repr(float(it["passivity_margin"])),
                        repr(float(it["small_gain_margin"]))])


def outcome_summary(outcome: DesignOutcome) -> dict:
    return {
        "status": outcome.status,
        "controller": outcome.cfg.to_dict(),
        "crossover_omega": outcome.reports.crossover,
        "reports": {k: r.summary() for k, r in outcome.reports.reports.items()},
        "iterations": outcome.iterations,
    }


def write_outcome_json(outcome: DesignOutcome, path) -> None:
    with open(path, "w") as fh:
        json.dump(outcome_summary(outcome), fh, indent=2, sort_keys=True)
        fh.write("\n")
