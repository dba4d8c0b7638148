"""Timestamp sets, the sampling operator and its complement, and generators.

Random generators use a splitmix64 stream so realizations are identical on
every platform for a given seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameters, LengthMismatch

_MASK = (1 << 64) - 1


class SplitMix64:
    """Minimal splitmix64 generator (Steele, Lea and Flood constants)."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Float in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Integer in [0, n)."""
        return int(self.uniform() * n)


@dataclass(frozen=True, eq=False)
class TimestampSet:
    stamps: np.ndarray
    horizon: int

    def __post_init__(self):
        s = np.asarray(self.stamps, dtype=np.int64).ravel().copy()
        h = int(self.horizon)
        if h < 0:
            raise InvalidParameters("horizon must be non-negative")
        if s.size:
            if np.any(np.diff(s) <= 0):
                raise InvalidParameters("stamps must be strictly increasing")
            if s[0] < 0 or s[-1] >= h:
                raise InvalidParameters("stamps must lie in [0, horizon)")
        s.setflags(write=False)
        object.__setattr__(self, "stamps", s)
        object.__setattr__(self, "horizon", h)

    @classmethod
    def all(cls, horizon: int) -> "TimestampSet":
        return cls(np.arange(horizon), horizon)

    @classmethod
    def none(cls, horizon: int) -> "TimestampSet":
        return cls(np.zeros(0, dtype=np.int64), horizon)

    @classmethod
    def from_mask(cls, mask) -> "TimestampSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask), mask.size)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.horizon, dtype=bool)
        m[self.stamps] = True
        return m

    def __len__(self):
        return self.stamps.size

    def __eq__(self, other):
        if not isinstance(other, TimestampSet):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.stamps, other.stamps)

    __hash__ = None


def _check(e, psi):
    e = np.asarray(e, dtype=float)
    if e.ndim != 1 or e.size != psi.horizon:
        raise LengthMismatch(f"signal length {e.size} != horizon {psi.horizon}")
    return e


def apply_T(e, psi: TimestampSet) -> np.ndarray:
    """Pass ``e`` at the timestamps, zero elsewhere."""
    e = _check(e, psi)
    out = np.zeros_like(e)
    out[psi.stamps] = e[psi.stamps]
    return out


def apply_T_complement(e, psi: TimestampSet) -> np.ndarray:
    """Zero at the timestamps, ``e`` elsewhere."""
    e = _check(e, psi)
    out = e.copy()
    out[psi.stamps] = 0.0
    return out


def sector_check(e, psi: TimestampSet) -> bool:
    """Direct evaluation of the sector conditions of the complement with K = 1.

    Checks ``phi*(phi - e) <= 0`` and ``e == 0 => phi == 0`` pointwise, with
    ``phi`` the complement output.
    """
    e = _check(e, psi)
    phi = apply_T_complement(e, psi)
    if np.any(phi[e == 0] != 0):
        return False
    return bool(np.all(phi * (phi - e) <= 0))


KINDS = ("all", "none", "bernoulli", "periodic", "burst", "encoder")


@dataclass(frozen=True)
class TimestampGenerator:
    """Parameters of one timestamp realization family.

    ``encoder`` needs either a ``trajectory`` (position per sample) or a
    constant ``velocity`` (position ``velocity * k``).
    """

    kind: str = "all"
    p: float = 1.0
    m: int = 1
    offset: int = 0
    loss_len: int = 0
    cycle_len: int = 1
    line_spacing: float = 1.0
    trajectory: tuple = field(default=())
    velocity: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameters(f"unknown timestamp kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameters("p must lie in [0, 1]")
        if self.m < 1:
            raise InvalidParameters("m must be >= 1")
        if self.kind == "burst" and not 0 <= self.loss_len < self.cycle_len:
            raise InvalidParameters("burst requires 0 <= loss_len < cycle_len")
        if not self.line_spacing > 0:
            raise InvalidParameters("line_spacing must be positive")
        if self.kind == "encoder" and not self.trajectory and self.velocity is None:
            raise InvalidParameters("encoder needs a trajectory or a velocity")
        object.__setattr__(self, "trajectory", tuple(float(x) for x in self.trajectory))

    @property
    def is_random(self) -> bool:
        return self.kind in ("bernoulli", "burst")


def generate(gen: TimestampGenerator, horizon: int) -> TimestampSet:
    """Realize a timestamp set. Never looks at any signal value."""
    if horizon < 1:
        raise InvalidParameters("horizon must be >= 1")
    k = np.arange(horizon)
    if gen.kind == "all":
        mask = np.ones(horizon, dtype=bool)
    elif gen.kind == "none":
        mask = np.zeros(horizon, dtype=bool)
    elif gen.kind == "periodic":
        mask = (k % gen.m) == (gen.offset % gen.m)
    elif gen.kind == "bernoulli":
        rng = SplitMix64(gen.seed)
        mask = np.array([rng.uniform() < gen.p for _ in range(horizon)], dtype=bool)
    elif gen.kind == "burst":
        rng = SplitMix64(gen.seed)
        mask = np.ones(horizon, dtype=bool)
        span = gen.cycle_len - gen.loss_len + 1
        for start in range(0, horizon, gen.cycle_len):
            s = start + rng.randint(span)
            mask[s : min(s + gen.loss_len, horizon)] = False
    else:  # encoder
        if gen.trajectory:
            x = np.asarray(gen.trajectory, dtype=float)
            if x.size < horizon:
                raise InvalidParameters("trajectory shorter than horizon")
            x = x[:horizon]
        else:
            x = gen.velocity * k.astype(float)
        lines = np.floor(x / gen.line_spacing)
        mask = np.zeros(horizon, dtype=bool)
        mask[1:] = lines[1:] != lines[:-1]
    return TimestampSet(np.flatnonzero(mask), horizon)


def write_stamps_csv(psi: TimestampSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"])
        for s in psi.stamps:
            w.writerow([int(s)])
