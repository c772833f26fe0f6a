import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from schednet.errors import ConfigInvalid, EmptyVector, GridTooSmall, NegativeInput
from schednet.weights import (
    BUILTIN,
    LOGLOG,
    WeightMode,
    custom,
    f_eps_log,
    f_loglog,
    f_logloglog,
    f_sqrtlog,
    get_weight_function,
    inverse,
    node_weights,
    node_weights_fast,
    validate_weight_function,
)

EE = math.exp(math.e) - math.e
queues = st.lists(st.floats(0, 1e9, allow_nan=False), min_size=1, max_size=8)


def test_loglog_values():
    assert f_loglog(0) == 0.0
    assert f_loglog(EE) == pytest.approx(1.0, abs=1e-14)
    # 40-digit decimal evaluation
    assert f_loglog(100) == pytest.approx(1.5329866057809139143, rel=1e-14)
    assert f_loglog(100) == pytest.approx(math.log(math.log(100 + math.e)), rel=1e-15)


@pytest.mark.parametrize("f", [f_loglog, f_sqrtlog, f_eps_log, f_logloglog])
def test_builtins_vanish_at_zero_and_increase(f):
    xs = np.logspace(-3, 12, 200)
    vals = f(xs)
    assert abs(f(0.0)) < 1e-12
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("f", [f_loglog, f_sqrtlog, f_eps_log, f_logloglog])
def test_negative_input(f):
    with pytest.raises(NegativeInput):
        f(-1.0)
    with pytest.raises(NegativeInput):
        f(np.array([1.0, -0.5]))


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_scalar_path_agrees(name):
    wf = BUILTIN[name]
    for x in [0.0, 0.3, 1.0, 17.0, 1e3, 1e9]:
        assert wf.at(x) == pytest.approx(float(wf(x)), rel=1e-13, abs=1e-15)


def test_node_weight_examples():
    assert node_weights([0, 0]).tolist() == [0.0, 0.0]
    np.testing.assert_allclose(node_weights([0, EE]), [1, 1], atol=1e-14)
    np.testing.assert_allclose(node_weights([0, EE], mode="local_only"), [0, 1], atol=1e-14)
    with pytest.raises(EmptyVector):
        node_weights([])


@given(queues)
def test_qmax_floor(q):
    w = node_weights(q)
    fq = f_loglog(np.asarray(q))
    floor = math.sqrt(f_loglog(max(q)))
    assert np.all(w >= fq - 1e-15)
    assert np.all(w >= floor - 1e-15)
    np.testing.assert_allclose(w, np.maximum(fq, floor), rtol=1e-15)


@given(queues, st.booleans())
def test_fast_path_matches(q, local):
    mode = WeightMode.LOCAL_ONLY if local else WeightMode.WITH_QMAX
    np.testing.assert_allclose(node_weights_fast(list(q), LOGLOG, local), node_weights(q, LOGLOG, mode),
                               rtol=1e-13, atol=1e-15)


def test_fast_path_custom_function():
    wf = custom(lambda x: np.log1p(x), "log1p")
    q = [0.0, 10.0, 3.0]
    np.testing.assert_allclose(node_weights_fast(q, wf, False), node_weights(q, wf), rtol=1e-13)
    assert not wf.validated


def test_lookup():
    assert get_weight_function("loglog") is LOGLOG
    with pytest.raises(ConfigInvalid):
        get_weight_function("cubic")


def test_inverse():
    y = f_loglog(1234.5)
    assert inverse(f_loglog, y) == pytest.approx(1234.5, rel=1e-9)


def test_validator_loglog_short_grid():
    # the decreasing tail appears only for large arguments at the smallest delta
    rep = validate_weight_function(LOGLOG, [10.0 ** k for k in range(1, 13)])
    assert rep.zero_ok and rep.monotone and rep.unbounded
    assert rep.trend_decreasing[0.5] and rep.trend_decreasing[0.75]
    assert not rep.trend_decreasing[0.25]


def test_validator_loglog_long_grid():
    assert validate_weight_function(LOGLOG, np.logspace(1, 60, 60)).passed


def test_validator_log_fails():
    rep = validate_weight_function(lambda x: math.log1p(x), [10.0 ** k for k in range(1, 13)])
    assert rep.monotone and not rep.trend_pass and not rep.passed


def test_validator_identity():
    rep = validate_weight_function(lambda x: x, [10.0 ** k for k in range(1, 13)])
    assert rep.zero_ok and rep.monotone
    assert not rep.trend_pass


def test_validator_logloglog_passes_short_grid():
    assert validate_weight_function(f_logloglog, [10.0 ** k for k in range(1, 13)]).passed


def test_validator_grid_too_small():
    with pytest.raises(GridTooSmall):
        validate_weight_function(LOGLOG, [1, 10, 100])


def test_report_caveat():
    rep = validate_weight_function(LOGLOG, np.logspace(1, 12, 12))
    assert "finite grid" in rep.caveat
