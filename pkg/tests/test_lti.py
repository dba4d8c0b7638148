import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from conftest import random_stable
from intermittent_rc.errors import (
    AlgebraicLoop,
    DenominatorZeroOnGrid,
    InvalidInput,
    UnstablePlant,
    ZeroOnUnitCircle,
)
from intermittent_rc.lti import (
    FrfData,
    StreamingFilter,
    TransferFunction,
    add,
    feedback,
    fir_taps,
    freq_response,
    frequency_grid,
    is_internally_stable,
    multiply,
    poles,
    read_frf_csv,
    sensitivity,
    simulate,
    write_frf_csv,
    zero_phase_fir_lowpass,
    zpetc_inverse,
)

DELAY = TransferFunction([0.0, 1.0])


# construction ---------------------------------------------------------


def test_normalization_and_preview_cancel():
    tf = TransferFunction([0.0, 2.0, 4.0], [2.0, 1.0, 0.0], preview=1)
    assert tf.den.tolist() == [1.0, 0.5]
    assert tf.num.tolist() == [1.0, 2.0]
    assert tf.preview == 0


def test_rejects_bad_coefficients():
    with pytest.raises(InvalidInput):
        TransferFunction([1.0], [0.0, 1.0])
    with pytest.raises(InvalidInput):
        TransferFunction([np.nan])
    with pytest.raises(InvalidInput):
        TransferFunction([1.0], preview=-1)
    with pytest.raises(InvalidInput):
        TransferFunction([1.0], sample_time=0.0)


def test_strict_properness():
    assert DELAY.is_strictly_proper
    assert not TransferFunction([1.0, 0.5]).is_strictly_proper
    assert not TransferFunction.advance(1).is_strictly_proper


def test_dict_roundtrip():
    tf = TransferFunction([0.1, 0.2], [1, -0.3], 2, 0.01)
    back = TransferFunction.from_dict(tf.to_dict())
    assert np.array_equal(back.num, tf.num) and np.array_equal(back.den, tf.den)
    assert (back.preview, back.sample_time) == (2, 0.01)


# frequency response ---------------------------------------------------


def test_delay_response_endpoints():
    v = freq_response(DELAY, [0.0, np.pi]).values
    assert v[0] == pytest.approx(1.0)
    assert v[1] == pytest.approx(-1.0)


def test_pole_on_grid_raises():
    integrator = TransferFunction([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(DenominatorZeroOnGrid):
        freq_response(integrator, [0.0, 1.0])


def test_preview_factor():
    w = frequency_grid(64)
    v = freq_response(TransferFunction.advance(3), w).values
    assert np.allclose(v, np.exp(3j * w), atol=1e-14)


def test_freq_response_matches_impulse_dft():
    # oracle: 4096-step impulse response (scipy lfilter), FFT on the DFT bins
    rng = np.random.default_rng(11)
    K = 4096
    for _ in range(20):
        tf = random_stable(rng)
        imp = np.zeros(K)
        imp[0] = 1.0
        h = signal.lfilter(tf.num, tf.den, imp)
        X = np.fft.fft(h)[: K // 2 + 1]
        w = 2 * np.pi * np.arange(K // 2 + 1) / K
        v = freq_response(tf, w).values
        assert np.max(np.abs(v - X) / np.maximum(np.abs(X), 1e-300)) <= 1e-10


def test_frf_validation():
    with pytest.raises(InvalidInput):
        FrfData([0.0, 0.2, 0.1], [1, 1, 1])
    with pytest.raises(InvalidInput):
        FrfData([0.0, 4.0], [1, 1])
    with pytest.raises(InvalidInput):
        FrfData([0.0, 1.0], [1])


def test_frf_csv_roundtrip(tmp_path):
    w = frequency_grid(33)
    frf = freq_response(TransferFunction([0, 0.5], [1, -0.5]), w)
    write_frf_csv(frf, tmp_path / "j.csv")
    back = read_frf_csv(tmp_path / "j.csv")
    assert np.array_equal(back.omegas, frf.omegas)
    assert np.array_equal(back.values, frf.values)
    assert back.source == "imported"


@pytest.mark.parametrize(
    "text",
    ["w,re,im\n0,1,0\n", "omega,re,im\n0,1\n", "omega,re,im\n0,a,0\n", "omega,re,im\n0.5,1,0\n0.1,1,0\n"],
)
def test_frf_csv_malformed(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(InvalidInput):
        read_frf_csv(p)


# simulation -----------------------------------------------------------


def test_simulate_identity_and_shift():
    x = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(simulate(TransferFunction([1.0]), x), x)
    assert np.array_equal(simulate(DELAY, [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0])


def test_simulate_preview_reads_ahead():
    y = simulate(TransferFunction.advance(2), [1.0, 2.0, 3.0, 4.0])
    assert y.tolist() == [3.0, 4.0, 0.0, 0.0]


@settings(max_examples=50, deadline=None)
@given(
    taps=st.lists(st.floats(-5, 5), min_size=1, max_size=8),
    u=st.lists(st.floats(-5, 5), min_size=1, max_size=40),
)
def test_simulate_fir_is_convolution(taps, u):
    y = simulate(TransferFunction(taps), u)
    ref = [sum(taps[i] * u[k - i] for i in range(len(taps)) if 0 <= k - i) for k in range(len(u))]
    assert np.allclose(y, ref, atol=1e-9)


def test_streaming_filter_matches_lfilter():
    rng = np.random.default_rng(3)
    tf = random_stable(rng, 3)
    u = rng.normal(size=200)
    f = StreamingFilter.from_tf(tf)
    y = [f.step(x) for x in u]
    assert np.allclose(y, signal.lfilter(tf.num, tf.den, u), atol=1e-12)


def test_streaming_peek_is_free_response():
    f = StreamingFilter([0.0, 0.5], [1.0, -0.5])
    f.step(1.0)
    p = f.peek()
    assert p == f.step(0.0)


# poles and stability --------------------------------------------------


def test_poles_examples():
    assert len(poles(TransferFunction([1.0, 2.0])).poles) == 0
    assert is_internally_stable(TransferFunction([1.0]))
    assert not is_internally_stable(TransferFunction([1.0], [1.0, -2.0]))
    assert poles(TransferFunction([1.0], [1.0, -2.0])).poles[0] == pytest.approx(2.0)
    ps = poles(TransferFunction([1.0], [1.0, -0.5]))
    assert ps.poles[0] == pytest.approx(0.5)
    assert is_internally_stable(TransferFunction([1.0], [1.0, -0.5]))


def test_marginal_pole_is_unstable():
    assert not is_internally_stable(TransferFunction([1.0], [1.0, -1.0]))


# inversion ------------------------------------------------------------


def test_zpetc_pure_delay():
    L = zpetc_inverse(TransferFunction.delay(3))
    assert L.preview == 3 and L.num.tolist() == [1.0]


def test_zpetc_minimum_phase_exact():
    J = TransferFunction([0, 0.2, 0.1], [1, -1.2, 0.45])
    w = frequency_grid(4096)
    JL = freq_response(J, w).values * freq_response(zpetc_inverse(J), w).values
    assert np.max(np.abs(1 - JL)) <= 1e-10


def test_zpetc_non_minimum_phase_zero_phase():
    J = TransferFunction([0, 1.0, -1.5], [1, -0.6])  # zero at z = 1.5
    w = frequency_grid(4096)
    JL = freq_response(J, w).values * freq_response(zpetc_inverse(J), w).values
    big = np.abs(JL) > 1e-6
    assert np.max(np.abs(np.angle(JL[big]))) <= 1e-9
    assert JL[0] == pytest.approx(1.0, abs=1e-12)


def test_zpetc_errors():
    with pytest.raises(ZeroOnUnitCircle):
        zpetc_inverse(TransferFunction([0, 1.0, 1.0], [1, -0.5]))
    with pytest.raises(UnstablePlant):
        zpetc_inverse(TransferFunction([0, 1.0], [1, -1.5]))


# zero-phase FIR -------------------------------------------------------


def test_fir_order_zero_is_unity():
    Q = zero_phase_fir_lowpass(0.3, 0)
    assert Q.num.tolist() == [1.0] and Q.preview == 0


@settings(max_examples=40, deadline=None)
@given(cut=st.floats(0.01, np.pi), m=st.integers(0, 40))
def test_fir_is_zero_phase_with_unit_dc(cut, m):
    Q = zero_phase_fir_lowpass(cut, m)
    taps = fir_taps(Q)
    assert Q.preview == m
    assert np.array_equal(taps, taps[::-1])
    v = freq_response(Q, frequency_grid(512)).values
    assert np.max(np.abs(v.imag)) <= 1e-12
    assert v[0].real == pytest.approx(1.0, abs=1e-12)


def test_fir_stopband():
    Q = zero_phase_fir_lowpass(0.2 * np.pi, 32)
    w = np.linspace(0.4 * np.pi, np.pi, 4000)
    assert np.max(np.abs(freq_response(Q, w).values)) <= 0.01


def test_fir_rejects_bad_cutoff():
    with pytest.raises(InvalidInput):
        zero_phase_fir_lowpass(0.0, 3)
    with pytest.raises(InvalidInput):
        zero_phase_fir_lowpass(4.0, 3)


# algebra --------------------------------------------------------------


def test_multiply_delays():
    d2 = multiply(DELAY, DELAY)
    assert d2.num.tolist() == [0.0, 0.0, 1.0]


def test_feedback_of_zero_is_zero():
    assert feedback(TransferFunction([0.0]), TransferFunction([3.0], [1, 0.2])).is_zero


def test_feedback_algebraic_loop():
    with pytest.raises(AlgebraicLoop):
        feedback(TransferFunction([-1.0]), TransferFunction([1.0]))


def test_feedback_and_sensitivity_pointwise():
    rng = np.random.default_rng(5)
    w = frequency_grid(257)[1:-1]
    for _ in range(10):
        g, h = random_stable(rng), random_stable(rng)
        gh = freq_response(g, w).values * freq_response(h, w).values
        T = freq_response(feedback(g, h), w).values
        S = freq_response(sensitivity(g, h), w).values
        assert np.allclose(T, gh / (1 + gh), rtol=1e-9, atol=1e-9)
        assert np.allclose(S + T, 1.0, atol=1e-9)


def test_add_with_preview():
    a = TransferFunction.advance(1)
    s = add(a, DELAY)
    w = frequency_grid(65)
    assert np.allclose(freq_response(s, w).values, np.exp(1j * w) + np.exp(-1j * w), atol=1e-14)
