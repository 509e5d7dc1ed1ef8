"""Flight scheduler, Monte-Carlo fleet runner, logging, and error metrics.

One flight advances the truth at 500 Hz and, on the shared ticks, runs
sensors then navigation (100 Hz), then guidance and control (50 Hz), then
the truth integration step; GNSS fires at 1 Hz and camera poses at 10 Hz.
Every stochastic element is wired to the seed tree, so one (aircraft seed,
flight seed, execution index) triple reproduces a run bit for bit.
"""

from __future__ import annotations

import configparser
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import environment as env
from . import gnc, lie, preflight
from . import sensors as sn
from .airframe import (ControlVector, default_aero_tables,
                       default_propeller_map, engine_power_fuel,
                       load_aero_tables, load_propeller_map)
from .atmosphere import state_at_hp
from .geodesy import radii_of_curvature
from .navigation import InertialNavigationSystem, ObservedState
from .seeds import aircraft_seed, derive_seed_tree, flight_seed

TRUTH_HZ = 500
SENSOR_EVERY = 5      # truth ticks per sensor/navigation tick (100 Hz)
CONTROL_EVERY = 10    # truth ticks per guidance/control tick (50 Hz)
CAMERA_EVERY = 50     # truth ticks per camera pose (10 Hz)
GNSS_EVERY = 500      # truth ticks per GNSS epoch (1 Hz)

_FLOAT_FMT = "%.17g"


@dataclass
class RunConfig:
    """Everything one Monte-Carlo fleet needs; parsed from an INI file."""
    aircraft_index: int = 0
    flight_index: int = 0
    runs: int = 1
    duration: float = 300.0
    log_decimation: int = 10          # of the 100 Hz streams
    # environment
    dt_offset_mean: float = 0.0
    dt_offset_sigma: float = 0.0
    dp_offset_mean: float = 0.0
    dp_offset_sigma: float = 0.0
    wind_speed_mean: float = 0.0
    wind_speed_sigma: float = 0.0
    wind_bearing_deg: float | None = None
    turbulence: str = "off"
    magnetic_corners: str = "default"
    # airframe
    aero_tables: str = "default"
    propeller: str = "default"
    # sensors
    tier: str = "baseline"
    sensor_specs: str = "default"
    ionosphere: bool = True
    gnss_outage: tuple | None = None   # (t0, t1)
    # mission
    script: str = "default"
    gains: str = "default"
    lon0_deg: float = -4.0
    lat0_deg: float = 40.5
    vtas0: float = 30.0
    hp0: float = 1000.0
    chi0_deg: float = 0.0
    mass0: float = 19.715


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    cfg = RunConfig()
    base = Path(path).parent

    def _resolve(text: str) -> str:
        return text if text == "default" else str((base / text).resolve())

    if parser.has_section("run"):
        run = parser["run"]
        cfg.aircraft_index = run.getint("aircraft_index", cfg.aircraft_index)
        cfg.flight_index = run.getint("flight_index", cfg.flight_index)
        cfg.runs = run.getint("runs", cfg.runs)
        cfg.duration = run.getfloat("duration", cfg.duration)
        cfg.log_decimation = run.getint("log_decimation", cfg.log_decimation)
    if parser.has_section("environment"):
        e = parser["environment"]
        cfg.dt_offset_mean = e.getfloat("dt_offset_mean", cfg.dt_offset_mean)
        cfg.dt_offset_sigma = e.getfloat("dt_offset_sigma", cfg.dt_offset_sigma)
        cfg.dp_offset_mean = e.getfloat("dp_offset_mean", cfg.dp_offset_mean)
        cfg.dp_offset_sigma = e.getfloat("dp_offset_sigma", cfg.dp_offset_sigma)
        cfg.wind_speed_mean = e.getfloat("wind_speed_mean", cfg.wind_speed_mean)
        cfg.wind_speed_sigma = e.getfloat("wind_speed_sigma",
                                          cfg.wind_speed_sigma)
        if "wind_bearing_deg" in e:
            cfg.wind_bearing_deg = e.getfloat("wind_bearing_deg")
        cfg.turbulence = e.get("turbulence", cfg.turbulence)
        if "magnetic_corners" in e:
            cfg.magnetic_corners = _resolve(e.get("magnetic_corners"))
    if parser.has_section("airframe"):
        a = parser["airframe"]
        if "aero_tables" in a:
            cfg.aero_tables = _resolve(a.get("aero_tables"))
        if "propeller" in a:
            cfg.propeller = _resolve(a.get("propeller"))
    if parser.has_section("sensors"):
        s = parser["sensors"]
        cfg.tier = s.get("tier", cfg.tier)
        if "specs" in s:
            cfg.sensor_specs = _resolve(s.get("specs"))
        cfg.ionosphere = s.getboolean("ionosphere", cfg.ionosphere)
        if "gnss_outage" in s:
            t0, t1 = s.get("gnss_outage").split(":")
            cfg.gnss_outage = (float(t0), float(t1))
    if parser.has_section("mission"):
        m = parser["mission"]
        if "script" in m:
            cfg.script = _resolve(m.get("script"))
        if "gains" in m:
            cfg.gains = _resolve(m.get("gains"))
        cfg.lon0_deg = m.getfloat("lon0_deg", cfg.lon0_deg)
        cfg.lat0_deg = m.getfloat("lat0_deg", cfg.lat0_deg)
        cfg.vtas0 = m.getfloat("vtas0", cfg.vtas0)
        cfg.hp0 = m.getfloat("hp0", cfg.hp0)
        cfg.chi0_deg = m.getfloat("chi0_deg", cfg.chi0_deg)
        cfg.mass0 = m.getfloat("mass0", cfg.mass0)
    return cfg


def _data_path(*parts) -> Path:
    import importlib.resources as res

    return Path(str(res.files("fwsim.data").joinpath("/".join(parts))))


def default_script_path() -> Path:
    return _data_path("missions", "level_cruise.txt")


# ---------------------------------------------------------------------------
# per-run logs and error metrics
# ---------------------------------------------------------------------------

TRUTH_COLUMNS = ("t_s", "lon_rad", "lat_rad", "h_m", "vb_x_mps", "vb_y_mps",
                 "vb_z_mps", "q_w", "q_x", "q_y", "q_z", "wib_x_radps",
                 "wib_y_radps", "wib_z_radps", "mass_kg", "vtas_mps",
                 "alpha_rad", "beta_rad", "hp_m", "p_pa", "temp_k")
SENSED_COLUMNS = ("t_s", "f_x_mps2", "f_y_mps2", "f_z_mps2", "w_x_radps",
                  "w_y_radps", "w_z_radps", "b_x_nt", "b_y_nt", "b_z_nt",
                  "p_pa", "temp_k", "vtas_mps", "aoa_rad", "aos_rad",
                  "throttle")
GNSS_COLUMNS = ("t_s", "lon_rad", "lat_rad", "h_m", "vn_mps", "ve_mps",
                "vd_mps")
EST_COLUMNS = ("t_s", "lon_rad", "lat_rad", "h_m", "vn_mps", "ve_mps",
               "vd_mps", "q_w", "q_x", "q_y", "q_z", "wnb_x_radps",
               "wnb_y_radps", "wnb_z_radps", "f_x_mps2", "f_y_mps2",
               "f_z_mps2", "vtas_mps", "alpha_rad", "beta_rad", "temp_k",
               "hp_m", "roc_mps", "dt_offset_k", "dp_offset_pa",
               "wind_n_mps", "wind_e_mps", "wind_d_mps", "mass_kg")
REF_COLUMNS = ("t_s", "op_index", "throttle_var", "throttle_target",
               "elevator_var", "elevator_target", "ailerons_var",
               "ailerons_target", "rudder_var", "rudder_target")
ERROR_COLUMNS = ("t_s", "nse_pos_north_m", "nse_pos_east_m", "nse_pos_down_m",
                 "nse_vn_mps", "nse_ve_mps", "nse_vd_mps", "nse_att_rad",
                 "fte_throttle", "fte_elevator", "fte_ailerons", "fte_rudder",
                 "tse_throttle", "tse_elevator", "tse_ailerons", "tse_rudder")

CAMERA_COLUMNS = ("t_s", "zeta_r_w", "zeta_r_x", "zeta_r_y", "zeta_r_z",
                  "zeta_d_w", "zeta_d_x", "zeta_d_y", "zeta_d_z")


@dataclass
class FlightLogs:
    truth: np.ndarray
    sensed: np.ndarray
    gnss: np.ndarray
    estimated: np.ndarray
    reference: np.ndarray
    errors: np.ndarray
    camera: np.ndarray
    init_conditions: np.ndarray = field(default_factory=lambda: np.zeros(16))

    def write(self, out_dir, decimation: int = 1) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, data, cols, dec in [
                ("truth", self.truth, TRUTH_COLUMNS, decimation),
                ("sensed", self.sensed, SENSED_COLUMNS, decimation),
                ("gnss", self.gnss, GNSS_COLUMNS, 1),
                ("estimated", self.estimated, EST_COLUMNS, decimation),
                ("reference", self.reference, REF_COLUMNS, decimation),
                ("errors", self.errors, ERROR_COLUMNS, decimation),
                ("camera", self.camera, CAMERA_COLUMNS, 1)]:
            path = out_dir / f"{name}.csv"
            rows = data[::dec] if dec > 1 else data
            with open(path, "w") as fh:
                fh.write(",".join(cols) + "\n")
                np.savetxt(fh, rows, fmt=_FLOAT_FMT, delimiter=",")
        with open(out_dir / "init_conditions.csv", "w") as fh:
            fh.write("q_w,q_x,q_y,q_z,eacc_x,eacc_y,eacc_z,egyr_x,egyr_y,"
                     "egyr_z,emag_x,emag_y,emag_z,bdev_n,bdev_e,bdev_d\n")
            np.savetxt(fh, self.init_conditions[None, :], fmt=_FLOAT_FMT,
                       delimiter=",")


def _series_stats(series: np.ndarray) -> dict:
    return {"mean": float(np.mean(series)), "std": float(np.std(series)),
            "max": float(np.max(np.abs(series)))}


@dataclass
class ErrorReport:
    """Per-channel NSE / FTE / TSE series and summary statistics."""
    t: np.ndarray
    nse: dict
    fte: dict
    tse: dict
    stats: dict = field(default_factory=dict)

    def summarize(self) -> dict:
        out = {}
        for group_name, group in [("nse", self.nse), ("fte", self.fte),
                                  ("tse", self.tse)]:
            for key, series in group.items():
                out[f"{group_name}_{key}"] = _series_stats(np.asarray(series))
        self.stats = out
        return out


def build_error_report(logs: FlightLogs) -> ErrorReport:
    t = logs.errors[:, 0]
    nse = {"pos_north": logs.errors[:, 1], "pos_east": logs.errors[:, 2],
           "pos_down": logs.errors[:, 3], "v_north": logs.errors[:, 4],
           "v_east": logs.errors[:, 5], "v_down": logs.errors[:, 6],
           "attitude": logs.errors[:, 7],
           "pos_horizontal": np.hypot(logs.errors[:, 1], logs.errors[:, 2])}
    fte = {name: logs.errors[:, 8 + i]
           for i, name in enumerate(("throttle", "elevator", "ailerons",
                                     "rudder"))}
    tse = {name: logs.errors[:, 12 + i]
           for i, name in enumerate(("throttle", "elevator", "ailerons",
                                     "rudder"))}
    report = ErrorReport(t=t, nse=nse, fte=fte, tse=tse)
    report.summarize()
    return report


# ---------------------------------------------------------------------------
# single flight
# ---------------------------------------------------------------------------

def build_context(cfg: RunConfig, tree) -> tuple:
    """Realize the environment and airframe for one run."""
    if cfg.aero_tables == "default":
        tables = default_aero_tables()
    else:
        tables = load_aero_tables(cfg.aero_tables)
    if cfg.propeller == "default":
        propeller = default_propeller_map()
    else:
        propeller = load_propeller_map(cfg.propeller)
    weather = env.realize_weather(tree.run["weather"], cfg.dt_offset_mean,
                                  cfg.dt_offset_sigma, cfg.dp_offset_mean,
                                  cfg.dp_offset_sigma)
    wind = env.realize_wind(tree.run["wind"], cfg.wind_speed_mean,
                            cfg.wind_speed_sigma, cfg.wind_bearing_deg)
    turbulence = env.TurbulenceGenerator(cfg.turbulence, seed=tree.turbulence,
                                         bearing=wind.bearing)
    deviations = env.realize_deviations(tree.run["models"])
    ctx = dyn.FlightContext(tables=tables, propeller=propeller,
                            weather=weather, wind=wind, turbulence=turbulence,
                            deviations=deviations)
    if cfg.magnetic_corners == "default":
        magnetic = env.MagneticModel.from_file(
            _data_path("environment", "magnetic_corners.txt"))
    else:
        magnetic = env.MagneticModel.from_file(cfg.magnetic_corners)
    return ctx, magnetic


def _channel_value(view: gnc.GncView, var: str) -> float:
    return getattr(view, var)


def _channel_error(view: gnc.GncView, var: str, target: float) -> float:
    value = _channel_value(view, var)
    if var in gnc.ANGLE_VARS:
        return math.atan2(math.sin(value - target), math.cos(value - target))
    return value - target


def run_flight(cfg: RunConfig, run_index: int = 0, collect_states: bool = False):
    """One deterministic flight; returns (FlightLogs, ErrorReport).

    Any module failure is re-raised annotated with the tick index and the
    stage that failed.
    """
    tree = derive_seed_tree(aircraft_seed(cfg.aircraft_index),
                            flight_seed(cfg.flight_index + run_index),
                            cfg.flight_index + run_index)
    ctx, magnetic = build_context(cfg, tree)
    specs = (sn.default_sensor_specs(cfg.tier) if cfg.sensor_specs == "default"
             else sn.load_sensor_specs(cfg.sensor_specs, cfg.tier))
    suite = sn.SensorSuite(specs, tree, ionosphere=cfg.ionosphere)

    lon0 = math.radians(cfg.lon0_deg)
    lat0 = math.radians(cfg.lat0_deg)
    state0, controls0 = dyn.trim_search(ctx, vtas=cfg.vtas0, hp_target=cfg.hp0,
                                        chi=math.radians(cfg.chi0_deg),
                                        lon=lon0, lat=lat0, mass=cfg.mass0)

    if cfg.script == "default":
        script_path = default_script_path()
    else:
        script_path = cfg.script
    operations = gnc.load_script(script_path, tree.run["guidance"])
    gains = (gnc.default_gains() if cfg.gains == "default"
             else gnc.load_gains(cfg.gains))
    guidance = gnc.Guidance(operations)
    control = gnc.ControlSystem(gains)
    _, pitch0, _ = lie.quat_to_euler(state0.q_nb)
    control.initialize_from_trim(controls0, pitch_trim=pitch0)

    def fuel_flow(throttle, hp_est, dt_est):
        try:
            s = state_at_hp(hp_est, dt_est)
        except ValueError:
            return 0.0
        return engine_power_fuel(throttle, s.delta, s.theta)[1]

    ins = InertialNavigationSystem(specs, magnetic, fuel_flow, cfg.mass0)

    fast = dyn.FastSe3Integrator(ctx, lon0, lat0)
    se3 = dyn.truth_to_se3(state0)
    controls = controls0

    n_truth = int(round(cfg.duration * TRUTH_HZ))
    n_sense = n_truth // SENSOR_EVERY + 1
    truth_log = np.zeros((n_sense, len(TRUTH_COLUMNS)))
    sensed_log = np.zeros((n_sense, len(SENSED_COLUMNS)))
    est_log = np.zeros((n_sense, len(EST_COLUMNS)))
    ref_log = np.zeros((n_sense, len(REF_COLUMNS)))
    err_log = np.zeros((n_sense, len(ERROR_COLUMNS)))
    gnss_log = np.zeros((n_truth // GNSS_EVERY + 1, len(GNSS_COLUMNS)))
    cam_log = np.zeros((n_truth // CAMERA_EVERY + 1, len(CAMERA_COLUMNS)))
    states = [] if collect_states else None

    row = gnss_row = cam_row = 0
    est = None
    op = None

    for k in range(n_truth + 1):
        t = k / TRUTH_HZ
        try:
            if k % SENSOR_EVERY == 0:
                aux = fast.evaluate(se3, controls, t)
                pos = aux[0:3]
                v_n = aux[3:6]
                q_nb = aux[6:10]
                f_ib = aux[10:13]
                alpha_ib = aux[13:16]
                w_ib = aux[31:34]
                b_real = env.apply_magnetic_deviation(
                    magnetic.field_ned(pos[0], pos[1]), ctx.deviations)

                f_meas, w_meas = suite.imu.measure(f_ib, w_ib, alpha_ib,
                                                   se3.mass, ins.mass_est)
                b_meas = suite.magnetometer.measure(b_real, q_nb)
                ads_meas = suite.air_data.measure(aux[19], aux[20], aux[23],
                                                  aux[24], aux[25])
                gnss_meas = None
                if k % GNSS_EVERY == 0:
                    in_outage = (cfg.gnss_outage is not None
                                 and cfg.gnss_outage[0] <= t < cfg.gnss_outage[1])
                    if not in_outage:
                        gnss_meas = suite.gnss.measure(pos, v_n)
                        gnss_log[gnss_row] = [t, *gnss_meas[0], *gnss_meas[1]]
                        gnss_row += 1

                if k == 0:
                    init = preflight.synthesize_fine_alignment(
                        q_nb, suite.imu.last_full_error_acc,
                        suite.imu.last_full_error_gyr,
                        suite.magnetometer.last_full_error,
                        ctx.deviations.b_dev_ned, tree)
                    init_record = np.concatenate([init.q_nb, init.e_acc,
                                                  init.e_gyr, init.e_mag,
                                                  init.b_dev_n])
                    if gnss_meas is None:
                        raise RuntimeError("GNSS outage cannot include t=0")
                    ins.initialize(init, w_meas, f_meas, ads_meas, gnss_meas)
                    est = _estimate_snapshot(ins, t)
                else:
                    est = ins.step(t, w_meas, f_meas, b_meas, ads_meas,
                                   gnss_meas, throttle=controls.throttle)

                view = gnc.view_from_estimate(t, est.q_nb, est.v_n, est.vtas,
                                              est.alpha, est.beta, est.hp,
                                              est.pos[2],
                                              throttle=controls.throttle)
                if k % CONTROL_EVERY == 0:
                    op = guidance.step(view)
                    controls = control.step(view, op)

                truth_log[row] = [t, *pos, *se3.twist[:3], *q_nb, *w_ib,
                                  se3.mass, aux[23], aux[24], aux[25],
                                  aux[22], aux[19], aux[20]]
                sensed_log[row] = [t, *f_meas, *w_meas, *b_meas, *ads_meas,
                                   controls.throttle]
                est_log[row] = [t, *est.pos, *est.v_n, *est.q_nb, *est.w_nb_b,
                                *est.f_ib_b, est.vtas, est.alpha, est.beta,
                                est.temp, est.hp, est.roc, est.dt_offset,
                                est.dp_offset, *est.wind_ned, est.mass]
                active_op = guidance.active
                ref_row = [t, float(guidance.index)]
                err_vals = [t]
                # navigation errors
                n_rad, m_rad = radii_of_curvature(pos[1])
                err_vals += [
                    (est.pos[1] - pos[1]) * (m_rad + pos[2]),
                    (est.pos[0] - pos[0]) * (n_rad + pos[2]) * math.cos(pos[1]),
                    -(est.pos[2] - pos[2]),
                    *(est.v_n - v_n),
                    lie.rotation_angle(lie.quat_mul(lie.quat_conjugate(q_nb),
                                                    est.q_nb)),
                ]
                # flight-technical and total errors per channel
                truth_view = gnc.view_from_estimate(
                    t, q_nb, v_n, aux[23], aux[24], aux[25], aux[22], pos[2],
                    throttle=controls.throttle)
                for channel in gnc.CHANNELS:
                    var, target = active_op.targets[channel]
                    ref_row += [float(_VAR_CODES[var]), target]
                setpoints = control.effective_setpoints or \
                    {ch: active_op.targets[ch] for ch in gnc.CHANNELS}
                for source_view in (view, truth_view):
                    for channel in gnc.CHANNELS:
                        var, target = setpoints[channel]
                        if var == "throttle":
                            err_vals.append(0.0)
                        else:
                            err_vals.append(_channel_error(source_view, var,
                                                           target))
                ref_log[row] = ref_row
                err_log[row] = err_vals
                if collect_states:
                    states.append((dyn.se3_to_truth(se3), est))
                row += 1

            if k % CAMERA_EVERY == 0:
                zeta_ec = suite.camera.pose_ecef(aux[0:3], aux[6:10], se3.mass)
                cam_log[cam_row] = [t, *zeta_ec]
                cam_row += 1

            if k < n_truth:
                se3, _ = fast.step(se3, controls, t)
        except Exception as exc:
            raise RuntimeError(
                f"flight aborted at tick {k} (t={t:.3f} s): {exc}") from exc

    logs = FlightLogs(truth=truth_log[:row], sensed=sensed_log[:row],
                      gnss=gnss_log[:gnss_row], estimated=est_log[:row],
                      reference=ref_log[:row], errors=err_log[:row],
                      camera=cam_log[:cam_row], init_conditions=init_record)
    report = build_error_report(logs)
    if collect_states:
        return logs, report, states
    return logs, report


_VAR_CODES = {var: i for i, var in enumerate(
    ("throttle", "vtas", "theta", "hp", "h", "gamma_tas", "bank", "chi",
     "psi", "mu_tas", "chi_tas", "beta"))}


def _estimate_snapshot(ins: InertialNavigationSystem, t: float) -> ObservedState:
    """Observed state right after initialization, before the first cycle."""
    from .navigation import BD, EA, EG, EM, F, T, V, W

    x = ins.nav.x
    air = ins.air.x
    return ObservedState(
        t=t, q_nb=ins.nav.q_nb.copy(), pos=x[T].copy(), v_n=x[V].copy(),
        w_nb_b=x[W].copy(), f_ib_b=x[F].copy(), e_gyr=x[EG].copy(),
        e_acc=x[EA].copy(), e_mag=x[EM].copy(), b_dev_n=x[BD].copy(),
        vtas=air[0], alpha=air[1], beta=air[2], temp=air[3], hp=air[4],
        roc=air[5], dt_offset=0.0, dp_offset=0.0, wind_ned=np.zeros(3),
        mass=ins.mass_est)


# ---------------------------------------------------------------------------
# fleet
# ---------------------------------------------------------------------------

@dataclass
class FleetResult:
    reports: list
    failures: dict
    wall_time: float

    def aggregate(self) -> dict:
        """Pooled statistics over the per-run error series."""
        pooled = {}
        if not self.reports:
            return pooled
        keys = [(g, k) for g, grp in [("nse", self.reports[0].nse),
                                      ("fte", self.reports[0].fte),
                                      ("tse", self.reports[0].tse)]
                for k in grp]
        for group, key in keys:
            series = np.concatenate([np.asarray(getattr(r, group)[key])
                                     for r in self.reports])
            pooled[f"{group}_{key}"] = _series_stats(series)
        return pooled


def run_fleet(cfg: RunConfig, runs: int | None = None,
              out_dir=None) -> FleetResult:
    runs = cfg.runs if runs is None else runs
    if runs < 1:
        raise ValueError("fleet needs at least one run")
    reports = []
    failures = {}
    start = time.perf_counter()
    for j in range(runs):
        try:
            logs, report = run_flight(cfg, run_index=j)
        except Exception as exc:   # fleet continues past per-run failures
            failures[j] = str(exc)
            continue
        reports.append(report)
        if out_dir is not None:
            logs.write(Path(out_dir) / f"run_{cfg.flight_index + j:04d}",
                       decimation=cfg.log_decimation)
    return FleetResult(reports=reports, failures=failures,
                       wall_time=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# offline navigation replay
# ---------------------------------------------------------------------------

def replay_navigation(cfg: RunConfig, run_index: int, logs: FlightLogs) -> np.ndarray:
    """Re-run the INS offline on the recorded sensed streams.

    Consumes only what the onboard system had: the sensed and GNSS logs,
    the recorded initial conditions, and the throttle history. Returns an
    estimated-log array identical bit for bit to the online one.
    """
    tree = derive_seed_tree(aircraft_seed(cfg.aircraft_index),
                            flight_seed(cfg.flight_index + run_index),
                            cfg.flight_index + run_index)
    _, magnetic = build_context(cfg, tree)
    specs = (sn.default_sensor_specs(cfg.tier) if cfg.sensor_specs == "default"
             else sn.load_sensor_specs(cfg.sensor_specs, cfg.tier))

    def fuel_flow(throttle, hp_est, dt_est):
        try:
            s = state_at_hp(hp_est, dt_est)
        except ValueError:
            return 0.0
        return engine_power_fuel(throttle, s.delta, s.theta)[1]

    ins = InertialNavigationSystem(specs, magnetic, fuel_flow, cfg.mass0)
    ic = logs.init_conditions
    init = preflight.InitConditions(q_nb=ic[0:4], e_acc=ic[4:7],
                                    e_gyr=ic[7:10], e_mag=ic[10:13],
                                    b_dev_n=ic[13:16])
    sensed = logs.sensed
    gnss = logs.gnss
    gnss_idx = 0
    est_rows = np.zeros((len(sensed), len(EST_COLUMNS)))
    for k, srow in enumerate(sensed):
        t = srow[0]
        f_meas = srow[1:4]
        w_meas = srow[4:7]
        b_meas = srow[7:10]
        ads_meas = srow[10:15]
        gnss_meas = None
        if gnss_idx < len(gnss) and abs(gnss[gnss_idx, 0] - t) < 1e-9:
            gnss_meas = (gnss[gnss_idx, 1:4], gnss[gnss_idx, 4:7])
            gnss_idx += 1
        if k == 0:
            if gnss_meas is None:
                raise ValueError("sensed log must start on a GNSS epoch")
            ins.initialize(init, w_meas, f_meas, ads_meas, gnss_meas)
            est = _estimate_snapshot(ins, t)
        else:
            est = ins.step(t, w_meas, f_meas, b_meas, ads_meas, gnss_meas,
                           throttle=sensed[k - 1, 15])
        est_rows[k] = [t, *est.pos, *est.v_n, *est.q_nb, *est.w_nb_b,
                       *est.f_ib_b, est.vtas, est.alpha, est.beta, est.temp,
                       est.hp, est.roc, est.dt_offset, est.dp_offset,
                       *est.wind_ned, est.mass]
    return est_rows
