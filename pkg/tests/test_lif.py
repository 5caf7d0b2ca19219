import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import assert_grad_close, central_difference
from wafer2spike.errors import ContractError, DimensionError, InputError
from wafer2spike.lif import (
    LifParams,
    LifState,
    SurrogateSpec,
    lif_step,
    lif_step_backward,
    surrogate_derivative,
)


def params(shape=(1,), scd=0.5, vd=0.5, v_thr=1.0, v_reset=0.0, dtype=np.float64):
    return LifParams(np.full(shape, scd, dtype), np.full(shape, vd, dtype), v_thr, v_reset)


def test_two_step_trace_by_hand():
    p = params()
    s = LifState.zeros(1, (1,), np.float64)
    psp = np.array([[0.8]])
    s = lif_step(s, psp, p)
    # isc = 0.8, v = 0.8: below threshold
    assert (s.isc[0, 0], s.v[0, 0], s.spk[0, 0]) == (0.8, 0.8, 0.0)
    s = lif_step(s, psp, p)
    # isc = 0.4 + 0.8 = 1.2, v_pre = 0.4 + 1.2 = 1.6 > 1: spike and reset
    assert s.spk[0, 0] == 1.0 and s.v[0, 0] == 0.0
    assert s.isc[0, 0] == pytest.approx(1.2, abs=1e-15)
    assert s.v_pre[0, 0] == pytest.approx(1.6, abs=1e-15)


def test_threshold_is_strict():
    p = params(v_thr=1.0)
    s = lif_step(LifState.zeros(1, (1,), np.float64), np.array([[1.0]]), p)
    assert s.spk[0, 0] == 0.0 and s.v[0, 0] == 1.0


def test_reset_to_nonzero_value():
    p = params(v_reset=-0.25)
    s = lif_step(LifState.zeros(1, (1,), np.float64), np.array([[3.0]]), p)
    assert s.spk[0, 0] == 1.0 and s.v[0, 0] == -0.25


def test_zero_decay_has_no_memory():
    p = params(scd=0.0, vd=0.0)
    s = LifState.zeros(1, (1,), np.float64)
    for _ in range(5):
        s = lif_step(s, np.array([[0.9]]), p)
        assert s.v[0, 0] == 0.9 and s.spk[0, 0] == 0.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**16), steps=st.integers(1, 8))
def test_spikes_are_binary_and_reset_exact(seed, steps):
    r = np.random.default_rng(seed)
    p = LifParams(r.uniform(0, 1, 6), r.uniform(0, 1, 6), 1.0, 0.0)
    s = LifState.zeros(3, (6,), np.float64)
    for _ in range(steps):
        s = lif_step(s, r.normal(0.5, 1.0, (3, 6)), p)
        assert set(np.unique(s.spk)) <= {0.0, 1.0}
        np.testing.assert_array_equal(s.v[s.spk == 1], 0.0)
        np.testing.assert_array_equal(s.v[s.spk == 0], s.v_pre[s.spk == 0])


@pytest.mark.parametrize("width", [0.5, 1.0, 2.0])
def test_rectangular_surrogate(width):
    p = params(shape=(5,))
    v = np.array([[1.0, 1.0 + 0.49 * width, 1.0 - 0.49 * width, 1.0 + 0.51 * width, -3.0]])
    d = surrogate_derivative(v, p, SurrogateSpec(width))
    np.testing.assert_allclose(d, [[1 / width, 1 / width, 1 / width, 0.0, 0.0]])


def test_smooth_surrogate_peak_matches_rectangle_height():
    p = params()
    d = surrogate_derivative(np.array([[1.0]]), p, SurrogateSpec(2.0, smooth=True))
    assert d[0, 0] == pytest.approx(0.5)


def test_surrogate_width_must_be_positive():
    with pytest.raises(InputError):
        SurrogateSpec(0.0)


def test_params_validation():
    with pytest.raises(DimensionError):
        LifParams(np.zeros(3), np.zeros(4))
    with pytest.raises(InputError):
        params(v_thr=0.0, v_reset=0.0)


def test_clamp_keeps_decays_in_unit_interval():
    p = LifParams(np.array([-0.2, 0.5, 1.7]), np.array([2.0, -1.0, 0.3]))
    p.clamp_()
    np.testing.assert_array_equal(p.w_scd, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(p.w_vd, [1.0, 0.0, 0.3])


def test_step_shape_mismatch():
    with pytest.raises(DimensionError):
        lif_step(LifState.zeros(2, (3,)), np.zeros((2, 4), np.float32), LifParams.default((3,)))


def test_backward_needs_forward_state():
    p = params()
    z = LifState.zeros(1, (1,), np.float64)
    with pytest.raises(ContractError):
        lif_step_backward(np.ones((1, 1)), None, None, z, z, p)


def test_backward_hand_computed_rectangle():
    # single step from rest, v_pre = 1.2 lies inside the window of width 1
    p = params()
    prev = LifState.zeros(1, (1,), np.float64)
    s = lif_step(prev, np.array([[1.2]]), p)
    g_psp, g_isc, g_v, g_scd, g_vd = lif_step_backward(np.array([[1.0]]), np.array([[0.5]]), None, prev, s, p)
    # g_u = gv*(1-s) + (gs + gv*(v_reset - v_pre)) * dspk = 0 + (1 - 0.6) * 1
    assert g_psp[0, 0] == pytest.approx(0.4)
    assert g_isc[0, 0] == pytest.approx(0.2)
    assert g_v[0, 0] == pytest.approx(0.2)
    assert g_scd[0] == 0.0 and g_vd[0] == 0.0


def test_multistep_backward_matches_finite_difference(rng):
    """Smooth mode, 4 steps unrolled, random cotangents on every spike output."""
    spec = SurrogateSpec(1.0, smooth=True)
    shape, B, T = (3,), 2, 4
    w_scd, w_vd = rng.uniform(0.2, 0.9, shape), rng.uniform(0.2, 0.9, shape)
    psp = rng.normal(0.7, 0.5, (T, B, *shape))
    cot = rng.normal(size=(T, B, *shape))

    def run():
        p = LifParams(w_scd, w_vd)
        s = LifState.zeros(B, shape, np.float64)
        states = []
        for t in range(T):
            s = lif_step(s, psp[t], p, spec)
            states.append(s)
        return p, states

    def loss():
        _, states = run()
        return float(sum(np.sum(cot[t] * states[t].spk) for t in range(T)))

    p, states = run()
    zero = LifState.zeros(B, shape, np.float64)
    g_isc = g_v = None
    g_psp = np.zeros_like(psp)
    g_scd, g_vd = np.zeros(shape), np.zeros(shape)
    for t in range(T - 1, -1, -1):
        prev = states[t - 1] if t else zero
        g_psp[t], g_isc, g_v, a, b = lif_step_backward(cot[t], g_v, g_isc, prev, states[t], p, spec)
        g_scd += a
        g_vd += b

    assert_grad_close(g_psp, central_difference(loss, psp), rtol=1e-5)
    assert_grad_close(g_scd, central_difference(loss, w_scd), rtol=1e-5)
    assert_grad_close(g_vd, central_difference(loss, w_vd), rtol=1e-5)
