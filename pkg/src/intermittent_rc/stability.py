"""Frequency-domain stability tests for RC under intermittent sampling.

Two region tests act on the complementary sensitivity ``T_R`` of the
equidistant RC loop:

* passivity: ``Re T_R <= 1`` everywhere (closed half plane, boundedness);
* small gain: ``|T_R| < 1`` everywhere (open disk, convergence).

Both are paired with a nominal-loop test (no encirclement of -1). Since the
half plane contains the disk, a small-gain pass always implies a passivity
pass.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, GridTooCoarse, InvalidInput, SingularReturnDifference
from .lti import (
    FrfData,
    TransferFunction,
    feedback,
    freq_response,
    frequency_grid,
    poly_response,
    sensitivity,
)

NYQUIST_DELTA = 1e-6
REGION_TOL = 1e-12
MAX_STEP_ANGLE = np.pi / 3
NEAR_SPACING = 0.1
MAX_GRID = 2**20


@dataclass
class StabilityReport:
    theorem: str
    s2_pass: bool
    s2_margin: float
    violation_frequencies: np.ndarray
    grid_size: int
    s1_pass: bool | None = None
    s1_winding_number: int | None = None
    grid_certified_only: bool = False
    omegas: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.s2_pass and self.s1_pass is not False

    def omega_intervals(self) -> list:
        """Violation set as closed intervals of adjacent grid points."""
        if self.omegas is None or not len(self.violation_frequencies):
            return []
        return _intervals(self.omegas, self.violation_frequencies)

    def summary(self) -> dict:
        return {
            "theorem": self.theorem,
            "passed": self.passed,
            "s1_pass": self.s1_pass,
            "s1_winding_number": self.s1_winding_number,
            "s2_pass": self.s2_pass,
            "s2_margin": self.s2_margin,
            "grid_size": self.grid_size,
            "grid_certified_only": self.grid_certified_only,
            "omega_intervals": [list(iv) for iv in self.omega_intervals()],
        }


def _intervals(grid, members) -> list:
    idx = np.flatnonzero(np.isin(grid, members))
    out = []
    start = prev = idx[0]
    for i in idx[1:]:
        if i != prev + 1:
            out.append((float(grid[start]), float(grid[prev])))
            start = i
        prev = i
    out.append((float(grid[start]), float(grid[prev])))
    return out


def write_report_csv(report: StabilityReport, path) -> None:
    """``omega,re_TR,im_TR,abs_TR`` rows (the response the region test saw)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "re_TR", "im_TR", "abs_TR"])
        if report.omegas is None:
            return
        for om, v in zip(report.omegas, report.values):
            w.writerow([repr(float(om)), repr(float(v.real)), repr(float(v.imag)), repr(float(abs(v)))])


def write_report_json(reports: dict, path, extra: dict | None = None) -> None:
    doc = {name: r.summary() for name, r in reports.items() if r is not None}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# winding numbers -------------------------------------------------------


def _closed_locus(values: np.ndarray) -> np.ndarray:
    """Extend a [0, pi] response to a closed [0, 2pi) contour by symmetry."""
    return np.concatenate([values, np.conj(values[::-1]), values[:1]])


def winding_number(values, point: complex = 0.0) -> int:
    """Net counter-clockwise turns of the closed locus around ``point``.

    Raises ``GridTooCoarse`` when any step turns by more than pi/3 around
    the point, or when steps near the point are longer than 0.1: in both
    cases the path between grid points is ambiguous.
    """
    loc = _closed_locus(np.asarray(values, dtype=complex)) - point
    r = np.abs(loc)
    if np.any(r == 0):
        raise InvalidInput("locus passes through the point")
    steps = np.angle(loc[1:] / loc[:-1])
    if np.max(np.abs(steps)) > MAX_STEP_ANGLE:
        raise GridTooCoarse("locus turns too fast between grid points")
    near = np.minimum(r[1:], r[:-1]) < 1.0
    if np.any(np.abs(np.diff(loc))[near] > NEAR_SPACING):
        raise GridTooCoarse("grid too coarse near the critical point")
    return int(np.rint(steps.sum() / (2 * np.pi)))


def nyquist_check(loop: FrfData, open_loop_unstable: int = 0, delta: float = NYQUIST_DELTA):
    """Nyquist test of ``1 + loop`` on the [0, 2pi) contour.

    Returns ``(pass, winding)`` with ``winding`` the counter-clockwise
    encirclements of -1. The closed loop is stable iff ``winding`` equals the
    number of open-loop poles outside the unit disk; pass also needs the
    locus to stay more than ``delta`` away from -1. An intersecting locus
    reports winding 0.
    """
    dist = np.min(np.abs(loop.values + 1.0))
    if dist <= delta:
        return False, 0
    w = winding_number(loop.values, -1.0)
    return w == open_loop_unstable, w


def _num_den_response(R: TransferFunction, omegas):
    n = poly_response(R.num, omegas)
    if R.preview:
        n = n * np.exp(1j * np.asarray(omegas) * R.preview)
    return n, poly_response(R.den, omegas)


def _plant_values(J, omegas):
    if isinstance(J, FrfData):
        return J.values
    return freq_response(J, omegas).values


def s1_check(J, R: TransferFunction, omegas=None, delta: float = NYQUIST_DELTA):
    """Nominal-loop test for ``J*R`` that tolerates poles of R on the circle.

    Evaluates the return-difference numerator ``f = den_R + J*num_R``: with J
    stable and R causal, the nominal loop is stable iff ``f`` does not wind
    around 0. The reported winding is that of ``f`` (0 when passing). For a
    parametric J the grid is doubled until the locus is resolved; FRF data
    is taken as given.

    Returns ``(pass, winding)``.
    """
    if R.preview:
        raise InvalidInput("controller must be causal")
    if R.is_zero:
        # open loop: stable because J is
        return True, 0
    parametric = isinstance(J, TransferFunction)
    if omegas is None:
        omegas = J.omegas if not parametric else frequency_grid()
    omegas = np.asarray(omegas, dtype=float)
    while True:
        jv = _plant_values(J, omegas)
        nR, dR = _num_den_response(R, omegas)
        f = dR + jv * nR
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(np.abs(dR) > 0, np.abs(f) / np.abs(dR), np.inf)
        if np.min(dist) <= delta:
            return False, 0
        try:
            w = winding_number(f, 0.0)
            return w == 0, w
        except GridTooCoarse:
            if not parametric or omegas.size * 2 > MAX_GRID:
                raise
            omegas = frequency_grid(2 * omegas.size - 1)


def _snap(margin: float) -> float:
    return 0.0 if abs(margin) <= REGION_TOL else float(margin)


def passivity_check(tr: FrfData, s1=None) -> StabilityReport:
    """Half-plane test: ``-T_R`` must stay in ``Re z >= -1``.

    ``margin = 1 - max Re T_R``; the region is closed so margin 0 passes.
    Margins within 1e-12 of zero are reported as exactly 0.
    """
    re = tr.values.real
    margin = _snap(1.0 - np.max(re))
    ok = margin >= 0
    viol = tr.omegas[re > 1.0 + REGION_TOL] if not ok else np.zeros(0)
    return StabilityReport(
        "passivity",
        ok,
        margin,
        viol,
        len(tr),
        *(s1 or (None, None)),
        grid_certified_only=tr.source == "imported",
        omegas=tr.omegas,
        values=tr.values,
    )


def small_gain_check(tr: FrfData, s1=None) -> StabilityReport:
    """Open-disk test ``|T_R| < 1``; margin ``1 - sup |T_R|`` must be > 0."""
    mag = np.abs(tr.values)
    margin = _snap(1.0 - np.max(mag))
    ok = margin > 0
    viol = tr.omegas[mag >= 1.0 - REGION_TOL] if not ok else np.zeros(0)
    return StabilityReport(
        "small_gain",
        ok,
        margin,
        viol,
        len(tr),
        *(s1 or (None, None)),
        grid_certified_only=tr.source == "imported",
        omegas=tr.omegas,
        values=tr.values,
    )


def _on_grid(x, omegas):
    if isinstance(x, FrfData):
        if x.omegas.shape != omegas.shape or not np.array_equal(x.omegas, omegas):
            raise GridMismatch("frequency grids differ")
        return x.values
    if isinstance(x, TransferFunction):
        return freq_response(x, omegas).values
    return np.broadcast_to(np.asarray(x, dtype=complex), omegas.shape)


def eq6_values(J: FrfData, L, Q, alpha: float = 1.0) -> np.ndarray:
    """``|(1 - alpha*J*L) * Q|`` on the grid of ``J``."""
    lv = _on_grid(L, J.omegas)
    qv = _on_grid(Q, J.omegas)
    return np.abs((1.0 - alpha * J.values * lv) * qv)


def classic_small_gain_eq6(J: FrfData, L, Q, alpha: float = 1.0):
    """Buffer-length independent test ``sup |(1 - J L) Q| < 1``.

    Returns ``(pass, margin)`` with ``margin = 1 - sup``.
    """
    margin = _snap(1.0 - np.max(eq6_values(J, L, Q, alpha)))
    return margin > 0, margin


def eq6_report(J: FrfData, L, Q, alpha: float = 1.0) -> StabilityReport:
    vals = eq6_values(J, L, Q, alpha)
    ok, margin = classic_small_gain_eq6(J, L, Q, alpha)
    viol = J.omegas[vals >= 1.0 - REGION_TOL] if not ok else np.zeros(0)
    return StabilityReport(
        "classic_eq6",
        ok,
        margin,
        viol,
        len(J),
        grid_certified_only=J.source == "imported",
        omegas=J.omegas,
        values=vals.astype(complex),
    )


def classic_tr_values(J: FrfData, L, Q, N: int, alpha: float = 1.0) -> np.ndarray:
    """Closed-form complementary sensitivity of the buffer RC."""
    lv = _on_grid(L, J.omegas)
    qv = _on_grid(Q, J.omegas)
    zN = np.exp(-1j * J.omegas * N)
    jl = alpha * J.values * lv
    return jl * qv * zN / (1.0 - (1.0 - jl) * qv * zN)


def classic_eq14(J: FrfData, L, Q, N: int, alpha: float = 1.0, s1=None) -> StabilityReport:
    """Half-plane test on the closed-form ``T_R`` of the buffer RC."""
    tr = FrfData(J.omegas, classic_tr_values(J, L, Q, N, alpha), J.source)
    rep = passivity_check(tr, s1)
    rep.theorem = "classic_eq14"
    return rep


def build_T_R(J, R: TransferFunction):
    """Complementary sensitivity and sensitivity of the equidistant loop.

    A parametric plant gives transfer functions; FRF data gives pointwise
    responses on its grid (computed without dividing by ``den_R`` so poles
    of R on the circle are harmless).
    """
    if isinstance(J, TransferFunction):
        return feedback(J, R), sensitivity(J, R)
    if R.is_zero:
        z = np.zeros(len(J), dtype=complex)
        return FrfData(J.omegas, z, J.source), FrfData(J.omegas, z + 1.0, J.source)
    nR, dR = _num_den_response(R, J.omegas)
    jn = J.values * nR
    ret = dR + jn
    if np.min(np.abs(ret)) < 1e-12:
        raise SingularReturnDifference("1 + J R vanishes on the grid")
    return FrfData(J.omegas, jn / ret, J.source), FrfData(J.omegas, dR / ret, J.source)


def tr_response(J, R: TransferFunction, omegas) -> FrfData:
    """Pointwise ``T_R`` for a model or FRF plant on ``omegas``."""
    jf = J if isinstance(J, FrfData) else freq_response(J, omegas)
    return build_T_R(jf, R)[0]


def refine_grid(omegas: np.ndarray, score: np.ndarray, count: int = 8, factor: int = 10) -> np.ndarray:
    """Add ``factor``-times denser points around the ``count`` highest scores."""
    n = omegas.size
    idx = np.argsort(score)[-count:]
    extra = []
    for i in idx:
        lo, hi = omegas[max(i - 1, 0)], omegas[min(i + 1, n - 1)]
        m = factor * (min(i + 1, n - 1) - max(i - 1, 0))
        extra.append(np.linspace(lo, hi, m + 1))
    return np.unique(np.concatenate([omegas, *extra]))
