"""Repetitive controllers: buffer-based RC and a resonator-bank stand-in.

Sign convention: every controller here maps the sampled error to ``r``;
the loop closes with plant input ``u = -r`` so the nominal loop is
``e = (1 + J R)^-1 v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DuplicateFrequency, InvalidInput, PreviewExceedsBuffer
from .lti import (
    FrfData,
    StreamingFilter,
    TransferFunction,
    _padd,
    _shift,
    add,
    freq_response,
)


@dataclass(frozen=True)
class RcConfig:
    """Buffer RC ``R = alpha*L*Q*z^-N / (1 - Q*z^-N)``.

    ``L`` and ``Q`` may carry preview; it is absorbed into the buffer delay,
    which requires ``N > L.preview + Q.preview``.
    """

    N: int
    L: TransferFunction
    Q: TransferFunction
    alpha: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInput("N must be a positive integer")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInput("alpha must lie in [0, 1]")
        if self.N <= self.L.preview + self.Q.preview:
            raise PreviewExceedsBuffer(
                f"N={self.N} must exceed n_L + n_Q = {self.L.preview + self.Q.preview}"
            )

    def with_alpha(self, alpha: float) -> "RcConfig":
        return replace(self, alpha=alpha)

    def to_dict(self) -> dict:
        return {
            "type": "classic",
            "N": self.N,
            "alpha": self.alpha,
            "L": self.L.to_dict(),
            "Q": self.Q.to_dict(),
        }


def rc_transfer(cfg: RcConfig) -> TransferFunction:
    L, Q, N = cfg.L, cfg.Q, cfg.N
    num = cfg.alpha * _shift(np.convolve(L.num, Q.num), N - L.preview - Q.preview)
    loop = _padd(Q.den, -_shift(Q.num, N - Q.preview))
    den = np.convolve(L.den, loop)
    return TransferFunction(num, den, 0, L.sample_time)


@dataclass
class RcState:
    """Ring buffer of the Q-filtered internal-model signal plus filter states."""

    buffer: list
    k: int
    q_filter: StreamingFilter
    l_filter: StreamingFilter


def init_state(cfg: RcConfig) -> RcState:
    return RcState(
        buffer=[0.0] * cfg.N,
        k=0,
        q_filter=StreamingFilter(cfg.Q.num, cfg.Q.den),
        l_filter=StreamingFilter(cfg.L.num, cfg.L.den),
    )


def rc_step(state: RcState, cfg: RcConfig, ebar_k: float):
    """Advance the controller one sample; returns ``(state, r_k)``.

    ``f = Q a`` is buffered; the loop taps ``f`` at delay ``N - n_Q`` and the
    output path at delay ``N - n_L - n_Q`` before the learning filter.
    """
    N = cfg.N
    buf, k = state.buffer, state.k
    fed_back = buf[(k - (N - cfg.Q.preview)) % N]
    out_tap = buf[(k - (N - cfg.L.preview - cfg.Q.preview)) % N]
    f = state.q_filter.step(ebar_k + fed_back)
    buf[k % N] = f
    state.k = k + 1
    r = cfg.alpha * state.l_filter.step(out_tap)
    return state, r


class RepetitiveController:
    """Stateful wrapper around ``rc_step`` for loop simulation."""

    def __init__(self, cfg: RcConfig):
        self.cfg = cfg
        self.state = init_state(cfg)

    def reset(self):
        self.state = init_state(self.cfg)

    def step(self, ebar_k: float) -> float:
        _, r = rc_step(self.state, self.cfg, ebar_k)
        return r


@dataclass(frozen=True)
class BasisRcConfig:
    """Parallel second-order internal models at fixed normalized frequencies.

    ``gains`` are complex: magnitude is the learning rate, the phase is the
    lead applied at that frequency (``gamma / J(e^jw)`` matches the plant).
    """

    frequencies: tuple
    gains: tuple = field(default=())

    def __post_init__(self):
        w = tuple(float(x) for x in self.frequencies)
        g = tuple(complex(x) for x in self.gains) if self.gains else (1.0 + 0j,) * len(w)
        if len(g) != len(w):
            raise InvalidInput("one gain per frequency required")
        for x in w:
            if not 0.0 < x < np.pi:
                raise InvalidInput("basis frequencies must lie in (0, pi)")
        if len(set(w)) != len(w):
            raise DuplicateFrequency("basis frequencies must be distinct")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "gains", g)

    def to_dict(self) -> dict:
        return {
            "type": "basis",
            "frequencies": list(self.frequencies),
            "gains": [[g.real, g.imag] for g in self.gains],
        }


def _resonator(omega: float, c: complex, sample_time: float) -> TransferFunction:
    # Re{c * sum_{n>=1} e^{j w n} q^n}
    ce = c * np.exp(1j * omega)
    num = [0.0, ce.real, -c.real]
    den = [1.0, -2.0 * np.cos(omega), 1.0]
    return TransferFunction(num, den, 0, sample_time)


def basis_rc_transfer(cfg: BasisRcConfig, sample_time: float = 1.0) -> TransferFunction:
    out = TransferFunction([0.0], [1.0], 0, sample_time)
    for w, c in zip(cfg.frequencies, cfg.gains):
        out = add(out, _resonator(w, c, sample_time))
    return out


def matched_basis_gains(plant, frequencies, gamma: float = 0.1) -> tuple:
    """Gains ``gamma / J(e^jw)`` from a model or from FRF data (interpolated)."""
    w = np.asarray(frequencies, dtype=float)
    if isinstance(plant, FrfData):
        j = np.interp(w, plant.omegas, plant.values.real) + 1j * np.interp(
            w, plant.omegas, plant.values.imag
        )
    else:
        j = freq_response(plant, w).values
    if np.any(np.abs(j) < 1e-12):
        raise InvalidInput("plant response vanishes at a basis frequency")
    return tuple(complex(gamma / x) for x in j)


def controller_transfer(cfg) -> TransferFunction:
    if isinstance(cfg, RcConfig):
        return rc_transfer(cfg)
    if isinstance(cfg, BasisRcConfig):
        return basis_rc_transfer(cfg)
    raise InvalidInput(f"unknown controller config {type(cfg).__name__}")


def make_controller(cfg):
    """Object with ``step(ebar) -> r`` realizing ``cfg`` from zero state."""
    if isinstance(cfg, RcConfig):
        return RepetitiveController(cfg)
    return StreamingFilter.from_tf(controller_transfer(cfg))
