import numpy as np
import pytest

from intermittent_rc.lti import TransferFunction

# filled by the acceptance suite, echoed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])


def random_stable(rng, order=None, radius=0.9, strictly_proper=False):
    """Random real stable system with poles inside ``radius``."""
    order = int(rng.integers(1, 5)) if order is None else order
    roots = []
    while len(roots) < order:
        r = radius * rng.uniform(0.05, 1.0)
        if order - len(roots) >= 2 and rng.uniform() < 0.5:
            a = rng.uniform(0.1, np.pi - 0.1)
            roots += [r * np.exp(1j * a), r * np.exp(-1j * a)]
        else:
            roots.append(r * rng.choice([-1.0, 1.0]))
    den = np.real(np.poly(roots))
    num = rng.normal(size=int(rng.integers(1, 4)))
    if strictly_proper:
        num = np.concatenate([[0.0], num])
    return TransferFunction(num, den)


@pytest.fixture
def plant():
    """Second-order, stable, minimum-phase, one-step delay."""
    return TransferFunction([0, 0.2, 0.1], [1, -1.2, 0.45])


def mismatch_plant(model, omega_r=1.0, radius=0.7):
    """``model`` times an unmodelled unit-DC-gain resonance at ``omega_r``."""
    den = [1.0, -2 * radius * np.cos(omega_r), radius**2]
    extra = TransferFunction([sum(den)], den)
    true = model * extra
    return TransferFunction(true.num, true.den)


@pytest.fixture
def true_plant(plant):
    return mismatch_plant(plant)
