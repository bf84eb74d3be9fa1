import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vesim.analytic import LambertDomainError, lambert_w0, lambert_w0_exp


def newton_w0(x, tol=1e-15):
    """Independent oracle: damped Newton on w*e^w = x from a safe seed."""
    if x == 0.0:
        return 0.0
    w = math.log1p(x) if x > -0.2 else -1.0 + math.sqrt(2 * (1 + math.e * x))
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        step = f / (ew * (w + 1.0)) if w != -1.0 else f
        w_new = w - step
        if abs(w_new - w) < tol * max(1.0, abs(w)):
            return w_new
        w = w_new
    return w


def test_fixed_points():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)


def test_reference_value_against_newton_oracle():
    assert lambert_w0(1.0) == pytest.approx(newton_w0(1.0), abs=1e-14)
    assert lambert_w0(1.0) == pytest.approx(0.5671432904, abs=1e-10)


def test_domain_error_below_branch_point():
    with pytest.raises(LambertDomainError):
        lambert_w0(-0.5)


def test_residual_bound_on_log_grid():
    xs = np.concatenate([
        [-1 / math.e + 1e-9, -1e-6, 0.0],
        10.0 ** np.linspace(-12, 6, 300),
    ])
    w = lambert_w0(xs)
    resid = np.abs(w * np.exp(w) - xs)
    assert np.all(resid <= 1e-12 * np.maximum(1.0, np.abs(xs)))


@given(st.floats(-1 / math.e + 1e-9, 1e6))
def test_matches_newton_oracle(x):
    assert lambert_w0(x) == pytest.approx(newton_w0(x), rel=1e-10,
                                          abs=1e-12)


def test_log_domain_consistency_small():
    for y in (-5.0, 0.0, 3.0, 100.0):
        assert lambert_w0_exp(y) == pytest.approx(lambert_w0(math.exp(y)),
                                                  rel=1e-13)


def test_log_domain_huge_argument():
    # w + log(w) = y must hold where exp(y) overflows
    for y in (800.0, 5e3, 1e6, 1e12):
        w = lambert_w0_exp(y)
        assert w + math.log(w) == pytest.approx(y, rel=1e-13)


def test_vectorized_shapes():
    ys = np.array([-2.0, 10.0, 1000.0])
    out = lambert_w0_exp(ys)
    assert out.shape == (3,)
    assert out[2] == pytest.approx(lambert_w0_exp(1000.0), rel=1e-14)


def test_lambert_domain_function_identity():
    # the substrate-law argument f overflows in linear space at the
    # default cargo load; the log form must still invert exactly at dt=0
    c_start, km = 300.0, 1.3e-2
    y = math.log(c_start / km) + c_start / km  # log(f(0))
    w = lambert_w0_exp(y)
    assert km * w == pytest.approx(c_start, rel=1e-12)
    assert w + math.log(w) == pytest.approx(y, rel=1e-13)
