"""Airframe model: mass properties, aerodynamic tables, engine, propeller.

The aerodynamic coefficient database follows the classic decomposition into
a longitudinal group tabulated over (alpha, beta, elevator) and a lateral
group over (beta, ailerons, rudder); each coefficient is a base table plus
five linearized-derivative tables in the remaining inputs. Tables are
equispaced and evaluated with biparabolic interpolation. A synthetic table
generator with the qualitative properties of a stable, well-behaved
airframe stands in for wind-tunnel or vortex-lattice data.

Angles inside tables and control deflections are in degrees; everything
else is SI.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lie import skew

DEG = math.pi / 180.0

# --- mass and geometry -------------------------------------------------------

MASS_FULL = 19.715    # kg
MASS_EMPTY = 17.835   # kg
WING_AREA = 0.878     # m^2
WING_CHORD = 0.359    # m
WING_SPAN = 2.680     # m

T_RB_FULL = np.array([0.207, 0.0, -0.005])    # m, center of mass, full tank
T_RB_EMPTY = np.array([0.219, 0.0, -0.006])   # m, center of mass, empty tank

INERTIA_FULL = np.array([
    [2.202, 0.0, -0.191],
    [0.0, 3.462, 0.0],
    [-0.191, 0.0, 5.490],
])
INERTIA_EMPTY = np.array([
    [2.198, 0.0, -0.192],
    [0.0, 3.430, 0.0],
    [-0.192, 0.0, 5.458],
])

# --- power plant --------------------------------------------------------------

POWER_MAX = 4180.0        # W
# data sheet lists PSFC with ambiguous units; the published power/fuel curves
# (1.5 kg/hr at max power) pin it to 1.0e-7 kg/(W s)
PSFC = 1.0e-7             # kg/(W s)
PROP_DIAMETER = 0.51      # m


def mass_interp(m: float):
    """Linear interpolation of center of mass and inertia over fuel burn."""
    if m < MASS_EMPTY - 1e-9 or m > MASS_FULL + 1e-9:
        warnings.warn(f"mass {m:.3f} kg outside [{MASS_EMPTY}, {MASS_FULL}], "
                      "clamping", stacklevel=2)
        m = min(max(m, MASS_EMPTY), MASS_FULL)
    w = (MASS_FULL - m) / (MASS_FULL - MASS_EMPTY)
    t_rb = T_RB_FULL + w * (T_RB_EMPTY - T_RB_FULL)
    inertia = INERTIA_FULL + w * (INERTIA_EMPTY - INERTIA_FULL)
    return t_rb, inertia


# --- control vector -----------------------------------------------------------

@dataclass
class ControlVector:
    """Throttle fraction plus surface deflections in degrees."""
    throttle: float = 0.0
    elevator: float = 0.0
    ailerons: float = 0.0
    rudder: float = 0.0

    def clamped(self, surface_limit_deg: float = 8.0) -> "ControlVector":
        lim = surface_limit_deg
        return ControlVector(
            min(max(self.throttle, 0.0), 1.0),
            min(max(self.elevator, -lim), lim),
            min(max(self.ailerons, -lim), lim),
            min(max(self.rudder, -lim), lim),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.throttle, self.elevator, self.ailerons,
                         self.rudder])


def tail_fin_mix(elevator: float, rudder: float):
    """Equivalent left/right tail-fin deflections of the vee tail."""
    return elevator + rudder, elevator - rudder


# --- equispaced biparabolic interpolation --------------------------------------

def _axis_weights(start: float, step: float, count: int, x: float):
    """Stencil start index, weights, and a clamp flag for one axis.

    Four-point biparabolic weights in interior cells, single parabola in the
    first/last cell, linear for two-node axes. Node queries are exact and the
    scheme reproduces quadratics exactly.
    """
    u = (x - start) / step
    clamped = False
    if u < 0.0:
        u, clamped = 0.0, True
    elif u > count - 1:
        u, clamped = float(count - 1), True
    cell = min(int(u), count - 2)
    s = u - cell
    if count == 2:
        return 0, np.array([1.0 - s, s]), clamped
    if cell == 0:
        # parabola on nodes 0,1,2 evaluated at s in [0,1]
        w = np.array([(s - 1.0) * (s - 2.0) / 2.0, s * (2.0 - s),
                      s * (s - 1.0) / 2.0])
        return 0, w, clamped
    if cell == count - 2:
        # parabola on the last three nodes, local coordinate s+1 in [1,2]
        ss = s + 1.0
        w = np.array([(ss - 1.0) * (ss - 2.0) / 2.0, ss * (2.0 - ss),
                      ss * (ss - 1.0) / 2.0])
        return count - 3, w, clamped
    # interior: blend the two bracketing parabolas
    wl = np.array([s * (s - 1.0) / 2.0, 1.0 - s * s, s * (s + 1.0) / 2.0, 0.0])
    wr = np.array([0.0, (s - 1.0) * (s - 2.0) / 2.0, s * (2.0 - s),
                   s * (s - 1.0) / 2.0])
    return cell - 1, (1.0 - s) * wl + s * wr, clamped


@dataclass(frozen=True)
class TableGrid:
    starts: tuple
    steps: tuple
    counts: tuple

    @property
    def ndim(self) -> int:
        return len(self.starts)

    def axis_nodes(self, k: int) -> np.ndarray:
        return self.starts[k] + self.steps[k] * np.arange(self.counts[k])


def biparabolic_eval(grid: TableGrid, values: np.ndarray, point):
    """Evaluate stacked tables (leading axis = table index) at one point.

    Returns (values_at_point, clamped_flag). Out-of-hull queries are clamped
    to the hull and flagged.
    """
    out = values
    clamped = False
    # contract trailing axes one by one so intermediate arrays stay small
    for k in reversed(range(grid.ndim)):
        i0, w, c = _axis_weights(grid.starts[k], grid.steps[k], grid.counts[k],
                                 point[k])
        clamped |= c
        sl = [slice(None)] * out.ndim
        sl[-1] = slice(i0, i0 + len(w))
        out = out[tuple(sl)] @ w
    return out, clamped


def biparabolic_eval_3d(grid: TableGrid, values: np.ndarray, a, b, c):
    """Single-table convenience wrapper for three-dimensional tables."""
    v, flag = biparabolic_eval(grid, values[None, ...], (a, b, c))
    return float(v[0]), flag


# --- aerodynamic table database -------------------------------------------------

LON_GRID = TableGrid(starts=(-5.0, -10.0, -8.0), steps=(2.5, 2.5, 4.0),
                     counts=(8, 9, 5))     # (alpha, beta, delta_e) deg
LAT_GRID = TableGrid(starts=(-10.0, -8.0, -8.0), steps=(2.5, 4.0, 4.0),
                     counts=(9, 5, 5))     # (beta, delta_a, delta_r) deg

LON_COEFFS = ("CFx", "CFz", "CMm")
LAT_COEFFS = ("CFy", "CMl", "CMn")
LON_TERMS = ("base", "d_ailerons", "d_rudder", "d_p", "d_q", "d_r")
LAT_TERMS = ("base", "d_alpha", "d_elevator", "d_p", "d_q", "d_r")
LAT_ALPHA_ANCHOR_DEG = 5.0   # lateral tables are linearized about alpha = 5 deg


@dataclass
class AeroTables:
    """Stacked longitudinal and lateral coefficient tables.

    lon_values has shape (18, 8, 9, 5) ordered coefficient-major with the
    six terms of each coefficient contiguous; lat_values likewise (18, 9, 5, 5).
    """
    lon_values: np.ndarray
    lat_values: np.ndarray
    lon_grid: TableGrid = LON_GRID
    lat_grid: TableGrid = LAT_GRID

    def coefficients(self, alpha_deg, beta_deg, de, da, dr, p_nd, q_nd, r_nd):
        """Six body-frame force/moment coefficients plus the clamp flag."""
        lon, f1 = biparabolic_eval(self.lon_grid, self.lon_values,
                                   (alpha_deg, beta_deg, de))
        lat, f2 = biparabolic_eval(self.lat_grid, self.lat_values,
                                   (beta_deg, da, dr))
        lon = lon.reshape(3, 6)
        lat = lat.reshape(3, 6)
        lon_inputs = np.array([1.0, da, dr, p_nd, q_nd, r_nd])
        lat_inputs = np.array([1.0, alpha_deg - LAT_ALPHA_ANCHOR_DEG, de,
                               p_nd, q_nd, r_nd])
        cfx, cfz, cmm = lon @ lon_inputs
        cfy, cml, cmn = lat @ lat_inputs
        return np.array([cfx, cfy, cfz, cml, cmm, cmn]), (f1 or f2)


def aero_forces_moments(tables: AeroTables, rho, v_tas_b, omega_nb_b,
                        controls: ControlVector, m):
    """Aerodynamic force and moment in the body frame about the actual
    center of mass (moment corrected for the fuel-burn shift)."""
    u, v, w = v_tas_b
    vtas = math.sqrt(u * u + v * v + w * w)
    if vtas <= 1.0:
        raise ValueError("airspeed too low for the aerodynamic model")
    alpha_deg = math.atan2(w, u) / DEG
    beta_deg = math.asin(min(max(v / vtas, -1.0), 1.0)) / DEG
    p_nd = omega_nb_b[0] * WING_SPAN / (2.0 * vtas)
    q_nd = omega_nb_b[1] * WING_CHORD / (2.0 * vtas)
    r_nd = omega_nb_b[2] * WING_SPAN / (2.0 * vtas)
    coeffs, flag = tables.coefficients(alpha_deg, beta_deg, controls.elevator,
                                       controls.ailerons, controls.rudder,
                                       p_nd, q_nd, r_nd)
    qbar_s = 0.5 * rho * WING_AREA * vtas * vtas
    force = qbar_s * np.array([coeffs[0], coeffs[1], coeffs[2]])
    moment_full = qbar_s * np.array([WING_SPAN * coeffs[3],
                                     WING_CHORD * coeffs[4],
                                     WING_SPAN * coeffs[5]])
    t_rb, _ = mass_interp(m)
    moment = moment_full + skew(force) @ (t_rb - T_RB_FULL)
    return force, moment, flag


# --- synthetic default tables ----------------------------------------------------

# per-degree derivatives of the underlying smooth model
_CL0 = 0.50
_CL_ALPHA = 5.0 * DEG          # 5 per rad
_CL_DE = 0.008
_CL_BETA2 = -1.2e-4
_CD0 = 0.13
_CD_K = 0.05
_CM0 = 0.11
_CM_ALPHA = -2.1 * DEG
_CM_DE = -0.045
_CY_BETA = 0.5 * DEG
_CY_DR = 0.01
_CL_ROLL_BETA = -0.15 * DEG
_CL_ROLL_DA = 0.00625
_CL_ROLL_DR = 0.0022
_CN_BETA = 0.0018
_CN_DA = -0.001
_CN_DR = 0.0035
# dimensionless-rate derivatives
_CZ_Q = -8.0
_CM_Q = -20.0
_CLP = -0.45
_CLR = 0.10
_CNP = -0.03
_CNR = -0.12


def _lift_drag(alpha_deg, beta_deg, de):
    cl = (_CL0 + _CL_ALPHA * alpha_deg + _CL_DE * de
          + _CL_BETA2 * beta_deg * beta_deg)
    cd = _CD0 + _CD_K * cl * cl
    return cl, cd


def default_aero_tables() -> AeroTables:
    """Synthetic database: linear lift slope, parabolic polar, stabilizing
    pitch and yaw stiffness, exactly odd lateral base tables."""
    a, b, e = np.meshgrid(LON_GRID.axis_nodes(0), LON_GRID.axis_nodes(1),
                          LON_GRID.axis_nodes(2), indexing="ij")
    cl, cd = _lift_drag(a, b, e)
    ca, sa = np.cos(a * DEG), np.sin(a * DEG)
    cb = np.cos(b * DEG)
    cfx = -cb * ca * cd + sa * cl
    cfz = -cb * sa * cd - ca * cl
    cmm = _CM0 + _CM_ALPHA * a + _CM_DE * e
    zeros = np.zeros_like(a)
    lon = np.stack([
        cfx, zeros, zeros, zeros, zeros, zeros,                    # CFx terms
        cfz, zeros, zeros, zeros, np.full_like(a, _CZ_Q), zeros,   # CFz terms
        cmm, zeros, zeros, zeros, np.full_like(a, _CM_Q), zeros,   # CMm terms
    ])

    bb, da, dr = np.meshgrid(LAT_GRID.axis_nodes(0), LAT_GRID.axis_nodes(1),
                             LAT_GRID.axis_nodes(2), indexing="ij")
    _, cd5 = _lift_drag(LAT_ALPHA_ANCHOR_DEG, bb, 0.0)
    sb = np.sin(bb * DEG)
    cfy = -sb * cd5 - np.cos(bb * DEG) * (_CY_BETA * bb + _CY_DR * dr)
    # wind-frame side coefficient is positive for positive beta; the body
    # force is its negative, so cfy above is odd and negative-slope in beta
    cml = _CL_ROLL_BETA * bb + _CL_ROLL_DA * da + _CL_ROLL_DR * dr
    cmn = _CN_BETA * bb + _CN_DA * da + _CN_DR * dr
    zeros = np.zeros_like(bb)
    lat = np.stack([
        cfy, zeros, zeros, zeros, zeros, zeros,
        cml, -2.0e-5 * bb, zeros, np.full_like(bb, _CLP), zeros,
        np.full_like(bb, _CLR),
        cmn, zeros, zeros, np.full_like(bb, _CNP), zeros,
        np.full_like(bb, _CNR),
    ])
    return AeroTables(lon_values=lon, lat_values=lat)


# --- aero table file IO -----------------------------------------------------------

_AXIS_NAMES = {
    "lon": ("alpha_deg", "beta_deg", "delta_e_deg"),
    "lat": ("beta_deg", "delta_a_deg", "delta_r_deg"),
}


def write_aero_table(path, group: str, coeff: str, term: str, grid: TableGrid,
                     values: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(f"coefficient {coeff} term {term} group {group}\n")
        for name, start, step, count in zip(_AXIS_NAMES[group], grid.starts,
                                            grid.steps, grid.counts):
            fh.write(f"axis {name} start={start:g} step={step:g} count={count}\n")
        np.savetxt(fh, values.reshape(-1, values.shape[-1]), fmt="%.12g")


def read_aero_table(path):
    with open(path) as fh:
        head = fh.readline().split()
        coeff, term, group = head[1], head[3], head[5]
        starts, steps, counts = [], [], []
        for _ in range(3):
            parts = dict(item.split("=") for item in fh.readline().split()[2:])
            starts.append(float(parts["start"]))
            steps.append(float(parts["step"]))
            counts.append(int(parts["count"]))
        values = np.loadtxt(fh).reshape(tuple(counts))
    grid = TableGrid(tuple(starts), tuple(steps), tuple(counts))
    return group, coeff, term, grid, values


def save_aero_tables(tables: AeroTables, directory) -> None:
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for group, coeffs, grid, stacked in [
            ("lon", LON_COEFFS, tables.lon_grid, tables.lon_values),
            ("lat", LAT_COEFFS, tables.lat_grid, tables.lat_values)]:
        terms = LON_TERMS if group == "lon" else LAT_TERMS
        for ci, coeff in enumerate(coeffs):
            for ti, term in enumerate(terms):
                path = directory / f"{group}_{coeff}_{term}.txt"
                write_aero_table(path, group, coeff, term, grid,
                                 stacked[ci * 6 + ti])


def load_aero_tables(directory) -> AeroTables:
    from pathlib import Path

    directory = Path(directory)
    lon = np.zeros((18,) + tuple(LON_GRID.counts))
    lat = np.zeros((18,) + tuple(LAT_GRID.counts))
    lon_grid = lat_grid = None
    for path in sorted(directory.glob("*.txt")):
        group, coeff, term, grid, values = read_aero_table(path)
        if group == "lon":
            idx = LON_COEFFS.index(coeff) * 6 + LON_TERMS.index(term)
            lon[idx] = values
            lon_grid = grid
        else:
            idx = LAT_COEFFS.index(coeff) * 6 + LAT_TERMS.index(term)
            lat[idx] = values
            lat_grid = grid
    if lon_grid is None or lat_grid is None:
        raise FileNotFoundError(f"no aero tables found in {directory}")
    return AeroTables(lon_values=lon, lat_values=lat, lon_grid=lon_grid,
                      lat_grid=lat_grid)


# --- engine and propeller ----------------------------------------------------------

def engine_power_fuel(throttle: float, delta: float, theta: float):
    """Shaft power (W) and fuel flow (kg/s) from throttle and air ratios."""
    if delta <= 0.0 or theta <= 0.0:
        raise ValueError("atmospheric ratios must be positive")
    throttle = min(max(throttle, 0.0), 1.0)
    power = min(POWER_MAX * throttle, POWER_MAX * delta / math.sqrt(theta))
    return power, PSFC * power


def _interp_1d_scalar(start, step, count, values, x) -> float:
    """Scalar biparabolic interpolation along one equispaced axis."""
    i0, w, _ = _axis_weights(start, step, count, x)
    total = 0.0
    for k in range(len(w)):
        total += values[i0 + k] * w[k]
    return float(total)


@dataclass
class PropellerMap:
    """Thrust and power coefficient maps over the advance ratio."""
    j_grid: TableGrid
    ct: np.ndarray
    cp: np.ndarray
    diameter: float = PROP_DIAMETER

    def ct_at(self, j: float) -> float:
        return _interp_1d_scalar(self.j_grid.starts[0], self.j_grid.steps[0],
                                 self.j_grid.counts[0], self.ct, j)

    def cp_at(self, j: float) -> float:
        return _interp_1d_scalar(self.j_grid.starts[0], self.j_grid.steps[0],
                                 self.j_grid.counts[0], self.cp, j)

    @property
    def j_min(self) -> float:
        return self.j_grid.starts[0]

    @property
    def j_max(self) -> float:
        return self.j_grid.starts[0] + self.j_grid.steps[0] * (self.j_grid.counts[0] - 1)


def default_propeller_map() -> PropellerMap:
    j = np.arange(0.15, 1.2001, 0.05)
    ct = 0.12 * (1.0 - j / 1.3)
    cp = 0.075 * (1.0 - 0.55 * j * j)
    grid = TableGrid((0.15,), (0.05,), (len(j),))
    return PropellerMap(j_grid=grid, ct=ct, cp=cp)


def write_propeller_map(path, prop: PropellerMap) -> None:
    j = prop.j_grid.axis_nodes(0)
    with open(path, "w") as fh:
        fh.write("# advance_ratio thrust_coeff power_coeff\n")
        np.savetxt(fh, np.column_stack([j, prop.ct, prop.cp]), fmt="%.12g")


def load_propeller_map(path, diameter: float = PROP_DIAMETER) -> PropellerMap:
    data = np.loadtxt(path, ndmin=2)
    j = data[:, 0]
    step = j[1] - j[0]
    if not np.allclose(np.diff(j), step):
        raise ValueError("propeller map advance-ratio axis must be equispaced")
    grid = TableGrid((float(j[0]),), (float(step),), (len(j),))
    return PropellerMap(j_grid=grid, ct=data[:, 1], cp=data[:, 2],
                        diameter=diameter)


def propeller_thrust_torque(prop: PropellerMap, power: float, rho: float,
                            v_axial: float):
    """Thrust and torque for the flight loop, freewheeling below the map.

    When the demanded power is too small for the map at this airspeed
    (advance ratio beyond the tabulated range) the propeller is treated as
    freewheeling with zero thrust and torque.
    """
    if power <= 1.0 or v_axial <= 1.0:
        return 0.0, 0.0
    k = power / (rho * v_axial**3 * prop.diameter**2)
    if prop.cp_at(prop.j_max) - k * prop.j_max**3 > 0.0:
        return 0.0, 0.0
    _, thrust, torque = propeller_match(prop, power, rho, v_axial)
    return thrust, torque


def propeller_match(prop: PropellerMap, power: float, rho: float,
                    v_axial: float, max_iter: int = 80):
    """Shaft speed, thrust, and torque balancing the power coefficient.

    Finds the advance ratio where the map power coefficient equals the
    required one, by bisection; raises naming the bracket when the demanded
    operating point leaves the map.
    """
    if power <= 0.0 or rho <= 0.0 or v_axial <= 0.0:
        raise ValueError("propeller matching needs positive power, density, "
                         "and axial speed")
    d = prop.diameter
    k = power / (rho * v_axial**3 * d * d)   # required cp = k j^3

    def f(j):
        return prop.cp_at(j) - k * j**3

    lo, hi = prop.j_min, prop.j_max
    flo, fhi = f(lo), f(hi)
    if flo < 0.0 or fhi > 0.0:
        raise ValueError(
            f"no shaft speed in advance-ratio bracket [{lo:.3f}, {hi:.3f}] "
            f"matches power {power:.1f} W at v={v_axial:.1f} m/s")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    j = 0.5 * (lo + hi)
    n = v_axial / (j * d)
    thrust = rho * n * n * d**4 * prop.ct_at(j)
    torque = -power / (2.0 * math.pi * n)
    return n, thrust, torque
