import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bessmarket.agc import (AgcError, dispatch_unit_signal, mileage_requirement, mileage_series,
                            multiplier_bound, multipliers, prepare_trace, step_sizes)


def test_zero_mean_trace_is_scaled_to_target():
    out = prepare_trace([[0, 10, -10, 0]], [80.0])
    assert np.allclose(out, [[0, 20, -20, 0]], atol=1e-12)


def test_offset_trace_is_centred_then_scaled():
    # centred: [-1, 1, -1, 1]; from a zero boundary the mileage is 1 + 2 + 2 + 2 = 7
    assert mileage_requirement([[-1, 1, -1, 1]], 0) == 7.0
    out = prepare_trace([[2, 4, 2, 4]], [6.0])
    assert np.allclose(out, np.array([[-1, 1, -1, 1]]) * 6 / 7, atol=1e-12)
    assert mileage_series(out)[0] == pytest.approx(6.0, rel=1e-12)


def test_flat_interval_with_zero_requirement():
    assert np.all(prepare_trace([[3, 3, 3]], [0.0]) == 0.0)


def test_flat_interval_with_positive_requirement():
    with pytest.raises(AgcError):
        prepare_trace([[3, 3, 3]], [5.0])


def test_boundary_setpoint_carries_over():
    tr = np.array([[1.0, -1.0], [2.0, -2.0]])
    assert step_sizes(tr).tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_multiplier_example():
    # steps 5, 15, 15: mileage 35, largest step 15
    tr = np.array([[5.0, -10.0, 5.0]])
    assert multiplier_bound(tr, 0, 35.0) == pytest.approx(0.999 * 35 / 15, rel=1e-12)
    assert multiplier_bound(tr, 0, 35.0) == pytest.approx(2.331, rel=1e-12)


def test_multiplier_needs_movement():
    with pytest.raises(AgcError):
        multiplier_bound(np.zeros((1, 3)), 0, 10.0)
    assert multipliers(np.zeros((2, 3)), [0.0, 0.0]).tolist() == [1.0, 1.0]


def test_dispatch_shapes():
    tr = np.array([[1.0, -2.0], [3.0, 0.0]])
    assert dispatch_unit_signal([0.5, 0.25], tr).tolist() == [[0.5, -1.0], [0.75, 0.0]]
    assert dispatch_unit_signal([[0.5, 0.5], [0.5, 0.5]], tr).shape == (2, 2, 2)
    with pytest.raises(AgcError):
        dispatch_unit_signal([[0.7, 0.5], [0.5, 0.5]], tr)


def test_multiplier_rule_alone_does_not_contain_the_signal():
    # a slow ramp: largest level 9, largest step 6
    tr = np.array([[3, 6, 9, 6, 3, -3, -6, -9, -6, -3]], dtype=float)
    rgm = mileage_series(tr)
    assert rgm[0] == 33.0
    m = multipliers(tr, rgm)[0]
    rgc = 10.0
    pf = m * rgc / rgm[0]                # largest mileage the clearing allows
    assert pf * np.abs(tr).max() > rgc   # the unit would be sent beyond its capacity
    assert pf * step_sizes(tr).max() < rgc


finite = st.floats(-100, 100, allow_nan=False, allow_subnormal=False)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(2, 12)), elements=finite),
       st.lists(st.floats(1.0, 500.0), min_size=5, max_size=5))
def test_prepared_trace_contract(raw, targets):
    assume(np.all(np.ptp(raw, axis=1) > 1e-3))
    rgm = np.array(targets[:raw.shape[0]])
    try:
        out = prepare_trace(raw, rgm)
    except AgcError:
        assume(False)
    peak = np.abs(out).max()
    assert np.all(np.abs(out.mean(axis=1)) <= 1e-9 * peak)
    assert np.allclose(mileage_series(out), rgm, rtol=1e-9, atol=0)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(2, 10)), elements=finite))
def test_multiplier_strictly_below_ratio(tr):
    rgm = mileage_series(tr)
    assume(np.all(step_sizes(tr).max(axis=1) > 1e-6))
    m = multipliers(tr, rgm)
    assert np.all(m * step_sizes(tr).max(axis=1) < rgm)
    assert np.all(m >= (1.0 - 1e-3) * (1 - 1e-12))   # mileage is at least the largest step
