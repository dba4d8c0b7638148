"""Discrete-time SISO transfer functions in the unit-delay variable.

A system is stored as two coefficient arrays in ``q = z^-1`` (index ``i``
multiplies ``q**i``) plus an integer ``preview`` that models a ``z**preview``
advance. Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import signal

from .errors import (
    AlgebraicLoop,
    DenominatorZeroOnGrid,
    InvalidInput,
    RootFindingFailure,
    UnstablePlant,
    ZeroOnUnitCircle,
)

POLE_EPS = 1e-9
CANCEL_TOL = 1e-12
DEFAULT_GRID_SIZE = 2**14


def _trim(c: np.ndarray) -> np.ndarray:
    """Drop trailing (highest delay power) zero coefficients, keep >= 1."""
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1]


def _shift(c: np.ndarray, k: int) -> np.ndarray:
    """Multiply a polynomial in q by q**k."""
    if k == 0:
        return c
    return np.concatenate([np.zeros(k), c])


def _padd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Rational SISO system ``z**preview * num(q) / den(q)`` with ``q = z^-1``.

    On construction the coefficients are normalized so that ``den[0] == 1``,
    trailing zeros are trimmed, and any preview that is matched by leading
    zeros of the numerator is cancelled (an exact operation).
    """

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.ones(1))
    preview: int = 0
    sample_time: float = 1.0

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float)).copy()
        den = np.atleast_1d(np.asarray(self.den, dtype=float)).copy()
        if num.ndim != 1 or den.ndim != 1 or num.size == 0 or den.size == 0:
            raise InvalidInput("num and den must be non-empty 1-D coefficient lists")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise InvalidInput("coefficients must be finite")
        if den[0] == 0:
            raise InvalidInput("den[0] must be non-zero")
        preview = int(self.preview)
        if preview != self.preview or preview < 0:
            raise InvalidInput("preview must be a non-negative integer")
        if not self.sample_time > 0:
            raise InvalidInput("sample_time must be positive")
        num, den = num / den[0], den / den[0]
        num, den = _trim(num), _trim(den)
        if not np.any(num):
            preview = 0
        while preview > 0 and num[0] == 0 and num.size > 1:
            num = num[1:]
            preview -= 1
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "preview", preview)
        object.__setattr__(self, "sample_time", float(self.sample_time))

    # constructors -----------------------------------------------------
    @classmethod
    def gain(cls, k: float, sample_time: float = 1.0) -> "TransferFunction":
        return cls([k], [1.0], sample_time=sample_time)

    @classmethod
    def delay(cls, d: int = 1, sample_time: float = 1.0) -> "TransferFunction":
        return cls(_shift(np.ones(1), d), [1.0], sample_time=sample_time)

    @classmethod
    def advance(cls, d: int, sample_time: float = 1.0) -> "TransferFunction":
        return cls([1.0], [1.0], preview=d, sample_time=sample_time)

    # properties -------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not np.any(self.num)

    @property
    def is_strictly_proper(self) -> bool:
        return self.preview == 0 and self.num[0] == 0

    @property
    def is_fir(self) -> bool:
        return self.den.size == 1

    def __repr__(self):
        return (
            f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()}, "
            f"preview={self.preview})"
        )

    def to_dict(self) -> dict:
        return {
            "num": self.num.tolist(),
            "den": self.den.tolist(),
            "preview": self.preview,
            "sample_time": self.sample_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransferFunction":
        return cls(
            d["num"], d.get("den", [1.0]), d.get("preview", 0), d.get("sample_time", 1.0)
        )

    def __add__(self, other):
        return add(self, _as_tf(other, self.sample_time))

    __radd__ = __add__

    def __mul__(self, other):
        return multiply(self, _as_tf(other, self.sample_time))

    __rmul__ = __mul__

    def __neg__(self):
        return TransferFunction(-self.num, self.den, self.preview, self.sample_time)

    def __sub__(self, other):
        return add(self, -_as_tf(other, self.sample_time))


def _as_tf(x, sample_time):
    if isinstance(x, TransferFunction):
        return x
    return TransferFunction.gain(float(x), sample_time)


@dataclass(frozen=True, eq=False)
class FrfData:
    """Complex frequency response sampled at normalized frequencies in [0, pi]."""

    omegas: np.ndarray
    values: np.ndarray
    source: str = "model"

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).ravel().copy()
        v = np.asarray(self.values, dtype=complex).ravel().copy()
        if w.size != v.size:
            raise InvalidInput("omegas and values differ in length")
        if w.size == 0:
            raise InvalidInput("empty frequency grid")
        if not np.all(np.isfinite(w)):
            raise InvalidInput("non-finite frequency")
        if np.any(np.diff(w) <= 0):
            raise InvalidInput("omegas must be strictly increasing")
        if w[0] < 0 or w[-1] > np.pi + 1e-12:
            raise InvalidInput("omegas must lie in [0, pi]")
        if self.source not in ("model", "imported"):
            raise InvalidInput(f"unknown FRF source {self.source!r}")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.omegas.size


@dataclass(frozen=True)
class PoleSet:
    poles: np.ndarray

    @property
    def max_radius(self) -> float:
        return float(np.max(np.abs(self.poles))) if self.poles.size else 0.0


def frequency_grid(n: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Uniform grid of ``n`` points on [0, pi] (both ends included)."""
    if n < 2:
        raise InvalidInput("grid needs at least 2 points")
    return np.linspace(0.0, np.pi, int(n))


def poly_response(coeffs, omegas) -> np.ndarray:
    """Evaluate ``sum c_i q**i`` at ``q = exp(-j*omega)``."""
    x = np.exp(-1j * np.asarray(omegas, dtype=float))
    return P.polyval(x, np.asarray(coeffs, dtype=float))


def freq_response(tf: TransferFunction, omegas) -> FrfData:
    """Frequency response ``num(e^-jw) / den(e^-jw) * e^(jw*preview)``.

    Raises
    ------
    DenominatorZeroOnGrid
        If the denominator magnitude drops below 1e-12 at a grid point,
        i.e. a pole sits on the unit circle there.
    """
    w = np.asarray(omegas, dtype=float)
    d = poly_response(tf.den, w)
    bad = np.abs(d) < 1e-12
    if np.any(bad):
        raise DenominatorZeroOnGrid(
            f"pole on the unit circle at omega={w[bad][0]:.6g}"
        )
    vals = poly_response(tf.num, w) / d
    if tf.preview:
        vals = vals * np.exp(1j * w * tf.preview)
    return FrfData(w, vals, "model")


def simulate(tf: TransferFunction, u) -> np.ndarray:
    """Zero-initial-state response to a finite input record.

    Previewed (future) samples beyond the record are taken as zero, so the
    last ``preview`` outputs carry an end-of-record transient.
    """
    u = np.asarray(u, dtype=float)
    p = tf.preview
    if p:
        u = np.concatenate([u[p:], np.zeros(min(p, u.size))])
    return signal.lfilter(tf.num, tf.den, u)


def poles(tf: TransferFunction) -> PoleSet:
    """Roots of the denominator in the z-plane (companion-matrix eigenvalues)."""
    den = tf.den
    if den.size == 1:
        return PoleSet(np.zeros(0, dtype=complex))
    try:
        r = np.roots(den)
    except np.linalg.LinAlgError as exc:
        raise RootFindingFailure(str(exc)) from exc
    if not np.all(np.isfinite(r)):
        raise RootFindingFailure("non-finite roots")
    return PoleSet(r.astype(complex))


def is_internally_stable(tf: TransferFunction, eps: float = POLE_EPS) -> bool:
    return poles(tf).max_radius < 1.0 - eps


def zeros(tf: TransferFunction) -> np.ndarray:
    """Finite non-zero z-plane zeros of the numerator."""
    b = tf.num[np.flatnonzero(tf.num)[0]:] if np.any(tf.num) else tf.num
    if b.size <= 1:
        return np.zeros(0, dtype=complex)
    return np.roots(b).astype(complex)


def zpetc_inverse(tf: TransferFunction) -> TransferFunction:
    """Zero-phase-error tracking inverse.

    Minimum-phase zeros and all poles are inverted directly; each zero
    outside the unit disk is replaced by its conjugate-reciprocal factor
    and the result is scaled by the squared DC gain of the unstable
    numerator factor, so ``J*L`` is real, non-negative and 1 at DC.
    """
    if not is_internally_stable(tf):
        raise UnstablePlant("plant has poles on or outside the unit circle")
    if tf.is_zero:
        raise InvalidInput("cannot invert a zero system")
    num = tf.num
    d = int(np.flatnonzero(num)[0])
    b = num[d:]
    z = np.roots(b) if b.size > 1 else np.zeros(0, dtype=complex)
    if np.any(np.abs(np.abs(z) - 1.0) < POLE_EPS):
        raise ZeroOnUnitCircle("plant has a zero on the unit circle")
    unstable = z[np.abs(z) > 1.0]
    preview = d - tf.preview
    if unstable.size == 0:
        return _with_preview(tf.den, b, preview, tf.sample_time)
    stable = z[np.abs(z) < 1.0]
    bs = b[0] * np.real(np.poly(stable)) if stable.size else b[:1].copy()
    bu = np.real(np.poly(unstable))
    dc = bu.sum()
    return _with_preview(
        np.convolve(tf.den, bu[::-1]), bs * dc**2, preview + unstable.size, tf.sample_time
    )


def _with_preview(num, den, preview, sample_time):
    if preview < 0:
        num = _shift(np.asarray(num, dtype=float), -preview)
        preview = 0
    return TransferFunction(num, den, preview, sample_time)


def zero_phase_fir_lowpass(
    cutoff: float, half_order: int, sample_time: float = 1.0
) -> TransferFunction:
    """Hann-windowed sinc low-pass with taps ``q_-m..q_m`` and unit DC gain.

    The window is ``0.5 * (1 + cos(pi*n/(m+1)))`` so no tap is wasted on a
    zero end point. The filter is realized causally with ``preview = m``.
    """
    if not 0 < cutoff <= np.pi:
        raise InvalidInput("cutoff must lie in (0, pi]")
    m = int(half_order)
    if m != half_order or m < 0:
        raise InvalidInput("half_order must be a non-negative integer")
    n = np.arange(-m, m + 1)
    taps = cutoff / np.pi * np.sinc(cutoff * n / np.pi)
    taps *= 0.5 * (1.0 + np.cos(np.pi * n / (m + 1)))
    taps /= taps.sum()
    # exact symmetry regardless of rounding in the sum above
    taps = 0.5 * (taps + taps[::-1])
    return symmetric_fir(taps, sample_time)


def symmetric_fir(taps, sample_time: float = 1.0) -> TransferFunction:
    """Zero-phase FIR from an odd-length symmetric tap array centred at 0."""
    taps = np.asarray(taps, dtype=float)
    if taps.size % 2 != 1:
        raise InvalidInput("symmetric FIR needs an odd number of taps")
    return TransferFunction(taps, [1.0], preview=taps.size // 2, sample_time=sample_time)


def fir_taps(tf: TransferFunction) -> np.ndarray:
    """Taps of an FIR system indexed from ``-preview`` upward."""
    if not tf.is_fir:
        raise InvalidInput("system is not FIR")
    return tf.num.copy()


# algebra --------------------------------------------------------------


def add(g: TransferFunction, h: TransferFunction) -> TransferFunction:
    p = max(g.preview, h.preview)
    gn = _shift(g.num, p - g.preview)
    hn = _shift(h.num, p - h.preview)
    if g.den.size == h.den.size and np.allclose(g.den, h.den, rtol=0, atol=CANCEL_TOL):
        return TransferFunction(_padd(gn, hn), g.den, p, g.sample_time)
    num = _padd(np.convolve(gn, h.den), np.convolve(hn, g.den))
    return TransferFunction(num, np.convolve(g.den, h.den), p, g.sample_time)


def multiply(g: TransferFunction, h: TransferFunction) -> TransferFunction:
    return TransferFunction(
        np.convolve(g.num, h.num),
        np.convolve(g.den, h.den),
        g.preview + h.preview,
        g.sample_time,
    )


def _loop_parts(g, h):
    gh = multiply(g, h)
    if gh.is_zero:
        return None
    n, d, p = gh.num, gh.den, gh.preview
    den = _padd(_shift(d, p), n)
    num_t = n
    num_s = _shift(d, p)
    # common q**k factors cancel exactly
    k = 0
    while (
        k < min(len(den), len(num_t), len(num_s)) - 1
        and den[k] == 0
        and num_t[k] == 0
        and num_s[k] == 0
    ):
        k += 1
    den, num_t, num_s = den[k:], num_t[k:], num_s[k:]
    if abs(den[0]) <= CANCEL_TOL * np.max(np.abs(den)):
        raise AlgebraicLoop("instantaneous loop gain equals -1")
    return num_t, num_s, den


def feedback(g: TransferFunction, h: TransferFunction) -> TransferFunction:
    """Complementary sensitivity ``(1 + g*h)^-1 * g*h``."""
    parts = _loop_parts(g, h)
    if parts is None:
        return TransferFunction([0.0], [1.0], 0, g.sample_time)
    num_t, _, den = parts
    return TransferFunction(num_t, den, 0, g.sample_time)


def sensitivity(g: TransferFunction, h: TransferFunction) -> TransferFunction:
    """Sensitivity ``(1 + g*h)^-1``."""
    parts = _loop_parts(g, h)
    if parts is None:
        return TransferFunction([1.0], [1.0], 0, g.sample_time)
    _, num_s, den = parts
    return TransferFunction(num_s, den, 0, g.sample_time)


# streaming realization ------------------------------------------------


class StreamingFilter:
    """Transposed direct-form II realization of ``num(q)/den(q)`` with state.

    Preview is not handled here; callers absorb it into delays.
    """

    __slots__ = ("_b", "_a", "_z")

    def __init__(self, num, den=(1.0,)):
        b = np.asarray(num, dtype=float)
        a = np.asarray(den, dtype=float)
        b, a = b / a[0], a / a[0]
        n = max(b.size, a.size)
        self._b = np.pad(b, (0, n - b.size)).tolist()
        self._a = np.pad(a, (0, n - a.size)).tolist()
        self._z = [0.0] * (n - 1)

    @classmethod
    def from_tf(cls, tf: TransferFunction) -> "StreamingFilter":
        if tf.preview:
            raise InvalidInput("streaming realization needs a causal system")
        return cls(tf.num, tf.den)

    def reset(self):
        self._z = [0.0] * len(self._z)

    @property
    def state(self) -> list:
        return list(self._z)

    def peek(self) -> float:
        """Output for the next step excluding the direct feedthrough term."""
        return self._z[0] if self._z else 0.0

    def step(self, x: float) -> float:
        b, a, z = self._b, self._a, self._z
        n = len(z)
        y = b[0] * x + (z[0] if n else 0.0)
        for i in range(n - 1):
            z[i] = z[i + 1] + b[i + 1] * x - a[i + 1] * y
        if n:
            z[n - 1] = b[n] * x - a[n] * y
        return y


# CSV io ---------------------------------------------------------------


def write_frf_csv(frf: FrfData, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "re", "im"])
        for om, v in zip(frf.omegas, frf.values):
            w.writerow([repr(float(om)), repr(float(v.real)), repr(float(v.imag))])


def read_frf_csv(path) -> FrfData:
    """Load ``omega,re,im`` rows; any malformation raises ``InvalidInput``."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidInput(f"cannot read FRF file {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["omega", "re", "im"]:
        raise InvalidInput(f"{path}: header must be 'omega,re,im'")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InvalidInput(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != 3:
        raise InvalidInput(f"{path}: expected three columns per row")
    return FrfData(data[:, 0], data[:, 1] + 1j * data[:, 2], "imported")
