import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridtrade.pricing import (
    SDR_CAP,
    PriceBounds,
    PriceBoundsError,
    compute_prices,
    compute_sdr,
)

B = PriceBounds(0.05, 0.03, 0.01)


def test_default_compensation_is_midpoint():
    assert PriceBounds(0.05, 0.03).compensation == pytest.approx(0.01)


@pytest.mark.parametrize("lb,ls,lam", [(0.03, 0.05, 0.0), (0.05, 0.03, 0.03), (0.05, -0.01, 0.0)])
def test_invalid_bounds_rejected(lb, ls, lam):
    with pytest.raises(PriceBoundsError):
        PriceBounds(lb, ls, lam)


def test_sdr_ratio():
    assert compute_sdr([1.0, 1.0], [2.0, 2.0]) == 0.5


def test_sdr_negative_supply_clamps_to_zero():
    assert compute_sdr([-1.0, 0.0], [2.0, 2.0]) == 0.0


def test_sdr_zero_demand():
    assert compute_sdr([1.0], [0.0]) == SDR_CAP
    assert compute_sdr([0.0], [0.0]) == 1.0
    assert compute_sdr([-2.0], [0.0]) == 1.0


def test_sdr_caps_large_ratio():
    assert compute_sdr([1e6], [1.0]) == SDR_CAP


def test_sdr_requires_matching_lists():
    with pytest.raises(ValueError):
        compute_sdr([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        compute_sdr([], [])


def test_prices_at_zero_sdr_equal_import_price():
    p = compute_prices(0.0, B)
    assert p.sell == pytest.approx(0.05) and p.buy == pytest.approx(0.05)


def test_prices_half_sdr_hand_values():
    # sell = 0.04*0.05 / (0.01*0.5 + 0.04); buy = 0.5*sell + 0.5*0.05
    p = compute_prices(0.5, B)
    assert p.sell == pytest.approx(0.0444444444, abs=1e-9)
    assert p.buy == pytest.approx(0.0472222222, abs=1e-9)


def test_prices_surplus_branch():
    p = compute_prices(2.0, B)
    assert p.sell == pytest.approx(0.035)
    assert p.buy == pytest.approx(0.04)


def test_zero_compensation_surplus_collapses_to_export_price():
    p = compute_prices(3.0, PriceBounds(0.05, 0.03, 0.0))
    assert p.sell == p.buy == pytest.approx(0.03)


def test_continuity_at_unit_sdr():
    left = compute_prices(1.0, B)
    right = compute_prices(math.nextafter(1.0, 2.0), B)
    assert abs(left.sell - right.sell) < 1e-12
    assert abs(left.buy - right.buy) < 1e-12


bounds_st = st.tuples(
    st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0)
).map(lambda t: PriceBounds(max(t[0], t[1]), min(t[0], t[1]), abs(t[0] - t[1]) * t[2]))


@settings(max_examples=300, deadline=None)
@given(bounds_st, st.floats(0.0, SDR_CAP), st.floats(0.0, SDR_CAP))
def test_price_properties(bounds, s1, s2):
    lo, hi = sorted((s1, s2))
    a, b = compute_prices(lo, bounds), compute_prices(hi, bounds)
    for p in (a, b):
        assert bounds.export_price <= p.sell <= p.buy <= bounds.import_price
    assert b.sell <= a.sell + 1e-15
    assert b.buy <= a.buy + 1e-15
