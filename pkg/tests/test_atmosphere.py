import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwsim import atmosphere as atm
from fwsim.geodesy import BETA_T, G0_STANDARD, R_AIR, T0_STANDARD

OFFSET_GRID = [(-30.0, -5000.0), (-30.0, 5000.0), (0.0, 0.0),
               (10.0, 2000.0), (30.0, -5000.0), (30.0, 5000.0)]


def test_standard_msl_temperature():
    assert atm.temperature(0.0, 0.0) == 288.15


def test_temperature_offset_linear_example():
    # 288.15 + 10 - 6.5
    assert atm.temperature(1000.0, 10.0) == pytest.approx(291.65, abs=1e-12)


def test_temperature_minus_isa_is_offset_exactly():
    for hp in [0.0, 1234.5, 9000.0]:
        for dt in [-30.0, 0.0, 17.3]:
            assert atm.temperature(hp, dt) - atm.temperature_isa(hp) == pytest.approx(dt, abs=1e-12)


def test_above_tropopause_rejected():
    with pytest.raises(ValueError):
        atm.temperature_isa(11000.1)


def test_standard_msl_pressure():
    assert atm.pressure_from_hp(0.0) == 101325.0


def test_pressure_at_1000m():
    # direct evaluation with exponent -g0/(R betaT) = 5.25588
    assert atm.pressure_from_hp(1000.0) == pytest.approx(89874.6, abs=0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1000.0, 10999.0))
def test_pressure_round_trip(hp):
    assert atm.hp_from_pressure(atm.pressure_from_hp(hp)) == pytest.approx(
        hp, abs=1e-9)


def test_geopotential_collapses_in_standard_conditions():
    for hp in [0.0, 500.0, 5000.0, 10999.0]:
        assert atm.geopotential_from_hp(hp, 0.0, 0.0) == hp


def test_msl_definition_holds_for_any_offsets():
    # H evaluated at Hp_MSL must be exactly zero
    for dt, dp in OFFSET_GRID:
        hp_msl = atm.hp_at_msl(dp)
        assert atm.geopotential_from_hp(hp_msl, dt, dp) == pytest.approx(
            0.0, abs=1e-12)
    assert atm.hp_at_msl(4000.0) < 0.0


def test_geopotential_pressure_altitude_round_trip():
    for dt, dp in OFFSET_GRID:
        for big_h in [0.0, 750.0, 4321.0, 9000.0]:
            hp = atm.hp_from_geopotential(big_h, dt, dp)
            assert atm.geopotential_from_hp(hp, dt, dp) == pytest.approx(
                big_h, abs=1e-6)


def test_dh_dhp_equals_temperature_ratio():
    # finite differences of H(Hp) against T/T_isa at 200 sampled points
    rng = np.random.default_rng(42)
    step = 0.1
    for _ in range(200):
        dt = rng.uniform(-30.0, 30.0)
        dp = rng.uniform(-5000.0, 5000.0)
        hp = rng.uniform(100.0, 10000.0)
        num = (atm.geopotential_from_hp(hp + step, dt, dp)
               - atm.geopotential_from_hp(hp - step, dt, dp)) / (2.0 * step)
        ana = atm.temperature(hp, dt) / atm.temperature_isa(hp)
        assert num == pytest.approx(ana, rel=1e-6)


def test_state_at_standard_msl():
    state = atm.state_at(0.0, 0.0, 0.0)
    assert state.hp == pytest.approx(0.0, abs=1e-9)
    assert state.p == pytest.approx(101325.0)
    assert state.temp == pytest.approx(288.15)
    assert state.rho == pytest.approx(1.225, rel=1e-4)
    assert state.delta == pytest.approx(1.0)
    assert state.theta == pytest.approx(1.0)
    assert state.sigma == pytest.approx(1.0, rel=1e-4)


def test_ideal_gas_identity():
    for dt, dp in OFFSET_GRID:
        for big_h in [0.0, 2000.0, 8000.0]:
            s = atm.state_at(big_h, dt, dp)
            assert s.p == pytest.approx(s.rho * R_AIR * s.temp, rel=1e-9)


def test_theta_with_warm_offset_at_msl():
    s = atm.state_at(0.0, 20.0, 0.0)
    assert s.theta == pytest.approx((288.15 + 20.0) / 288.15, rel=1e-9)
    assert s.theta == pytest.approx(1.0694, abs=1e-4)


def test_hydrostatic_residual():
    # numerical dp/dH + rho g0 below 1e-4 Pa/m across the column
    step = 1.0
    for dt, dp in OFFSET_GRID:
        for big_h in np.linspace(100.0, 9000.0, 15):
            p_hi = atm.state_at(big_h + step, dt, dp).p
            p_lo = atm.state_at(big_h - step, dt, dp).p
            rho = atm.state_at(big_h, dt, dp).rho
            resid = (p_hi - p_lo) / (2.0 * step) + rho * G0_STANDARD
            assert abs(resid) < 1e-4


def test_temperature_gradient_is_beta_everywhere():
    for dt in [-20.0, 0.0, 25.0]:
        for hp in [0.0, 3000.0, 9000.0]:
            grad = (atm.temperature(hp + 1.0, dt) - atm.temperature(hp, dt))
            assert grad == pytest.approx(BETA_T, rel=1e-12)


def test_monotonicity():
    hps = np.linspace(0.0, 10999.0, 50)
    ps = [atm.pressure_from_hp(hp) for hp in hps]
    assert all(a > b for a, b in zip(ps, ps[1:]))
    hs = [atm.geopotential_from_hp(hp, 15.0, -2000.0) for hp in hps]
    assert all(a < b for a, b in zip(hs, hs[1:]))
