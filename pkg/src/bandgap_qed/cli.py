"""
Command-line front end.

Every command reads a device configuration (``--config``, the shipped paper
device by default), writes its tables into ``--out`` and reports problems on
stderr. Exit status is 0 on success, 1 when more than a tenth of a sweep
grid failed and 2 for configuration, usage or input errors.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .band_structure import (
    BELOW, band_edges, band_table, bloch_modes, density_of_states,
)
from .bound_state import (
    bare_frequency, fit_effective_length, linewidth_model, resonant_shift,
    solve_bound_state,
)
from .config import ConfigError, calibrate_device, config_dict, load_config, save_config
from .driven_qubit import (
    cooling_rates, dressed_lindblad_terms, dressed_steady_state, lindblad_steady_state,
    mixing_angle,
)
from .errors import BandgapQEDError, DomainError
from .io import heatmap_svg, lines_svg, read_csv, write_csv, write_json, write_map, write_overlay
from .spectra import (
    bound_state_linewidth, pump_probe_map, qubit_sweep_s21, to_db,
)

EXIT_OK, EXIT_GRID, EXIT_USAGE = 0, 1, 2
GRID_FAILURE_LIMIT = 0.10
FORMATS = ("csv", "json", "svg")


class UsageError(Exception):
    pass


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def parse_grid(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--grid expects <nx>x<ny>, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise UsageError("--grid sizes must be positive")
    return nx, ny


def parse_range(text: str, default_n: int) -> np.ndarray:
    """``start:stop[:n]`` or a single value."""
    parts = text.split(":")
    try:
        values = [float(p) for p in parts[:2]]
        n = int(parts[2]) if len(parts) == 3 else default_n
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}") from None
    if len(parts) == 1:
        return np.array(values)
    if len(parts) > 3 or n < 1 or not all(math.isfinite(v) for v in values):
        raise UsageError(f"range must be start:stop[:n] with n >= 1, got {text!r}")
    return np.linspace(values[0], values[1], n)


def parse_formats(text: str) -> set[str]:
    formats = {f.strip() for f in text.split(",") if f.strip()}
    unknown = formats - set(FORMATS)
    if not formats or unknown:
        raise UsageError(f"--format takes a non-empty subset of {','.join(FORMATS)}")
    return formats


class Context:
    """Resolved global options shared by the commands."""

    def __init__(self, args):
        self.args = args
        self.run = load_config(args.config)
        self.device = self.run.device
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {self.out}: {exc.strerror}")
        self.formats = parse_formats(args.format)
        self.grid = parse_grid(args.grid) if args.grid else None
        self.seed = args.seed

    def meta(self, command: str, **params) -> dict:
        return {"command": command, "config": config_dict(self.run), "parameters": params,
                "seed": self.seed, "version": __version__}

    def table(self, name: str, columns, rows, command: str, **params) -> Path | None:
        rows = list(rows)
        if "csv" not in self.formats:
            return None
        meta = self.meta(command, **params) if "json" in self.formats else None
        path = write_csv(self.out / name, columns, rows, meta)
        _log(f"wrote {path}")
        return path


# -- bands --------------------------------------------------------------------

def cmd_bands(ctx: Context) -> int:
    args = ctx.args
    geom = ctx.device.geometry.uniform() if args.uniform else ctx.device.geometry
    f_max = args.f_max
    n = ctx.grid[1] if ctx.grid else 2001
    k, idx, f = band_table(geom, f_max, n)
    ctx.table("bands.csv", ("k_per_mm", "band_index", "freq_GHz"), zip(k, idx, f), "bands",
              uniform=args.uniform, f_max=f_max, n=n)
    edges = band_edges(geom, (0.0, f_max))
    ctx.table("band_edges.csv", ("freq_GHz", "edge_side", "band_index"),
              [(e.frequency, e.edge_side, e.band_index) for e in edges], "bands",
              uniform=args.uniform, f_max=f_max)
    band = ctx.device.band
    f_dos = np.linspace(band.omega0 - 1.0, band.omega0 + 1.0, n)
    ctx.table("dos.csv", ("freq_GHz", "dos_per_GHz"),
              zip(f_dos, density_of_states(band, f_dos)), "bands", kappa=band.kappa)
    rows = []
    if args.uniform:
        _log("uniform crystal: skipping Bloch-mode profiles")
    else:
        for b in (1, 2):
            mode = bloch_modes(geom, math.pi / geom.period, b)
            rows += [(x, b, v.real, v.imag, abs(v)) for x, v in zip(mode.x, mode.profile)]
        ctx.table("bloch_modes.csv", ("x_mm", "band_index", "re_v", "im_v", "abs_v"), rows,
                  "bands", k_per_mm=math.pi / geom.period)
    if "svg" in ctx.formats:
        traces = [(k[idx == b], f[idx == b], f"band {b}") for b in np.unique(idx)]
        lines_svg(ctx.out / "bands.svg", traces, "k (rad/mm)", "frequency (GHz)")
    for e in edges:
        if e.band_index == 2 and e.edge_side == BELOW:
            print(f"second band lower edge: {e.frequency:.6f} GHz")
    return EXIT_OK


# -- boundstate ---------------------------------------------------------------

BOUND_COLUMNS = ("omega_q_GHz", "omega_b_GHz", "L_mm", "P_q", "gamma_GHz")


def _bound_row(device, omega_q: float, source: str):
    sol = solve_bound_state(device.qubit.with_frequency(omega_q), device.band)
    if source == "crystal":
        gamma = bound_state_linewidth(device, omega_q)
    else:
        gamma = float(linewidth_model(sol, device.d_eff, device.gamma_ext))
    return sol, (sol.omega_q, sol.omega_b, sol.loc_length, sol.qubit_weight, gamma)


def cmd_boundstate(ctx: Context) -> int:
    args = ctx.args
    device = ctx.device
    if args.omega_q is not None and args.sweep is None:
        sol, row = _bound_row(device, args.omega_q, args.linewidth)
        print(f"bare qubit      {sol.omega_q:.9f} GHz")
        print(f"bound state     {sol.omega_b:.9f} GHz")
        print(f"edge detuning   {sol.detuning_edge * 1e3:.6f} MHz")
        print(f"localization    {sol.loc_length:.6f} mm")
        print(f"qubit weight    {sol.qubit_weight:.6f}")
        print(f"linewidth       {row[4] * 1e3:.6f} MHz")
        ctx.table("boundstate.csv", BOUND_COLUMNS, [row], "boundstate",
                  omega_q=args.omega_q, linewidth=args.linewidth)
        return EXIT_OK
    n = ctx.grid[0] if ctx.grid else 61
    omega_q = parse_range(args.sweep or "6.9:8.1", n)
    rows, errors = [], []
    for f in omega_q:
        try:
            rows.append(_bound_row(device, float(f), args.linewidth)[1])
        except BandgapQEDError as exc:
            errors.append(f"omega_q={f:.9g}: {exc}")
            _log(f"no bound state at omega_q = {f:.9g} GHz: {exc}")
    ctx.table("boundstate.csv", BOUND_COLUMNS, rows, "boundstate",
              sweep=args.sweep, n=len(omega_q), linewidth=args.linewidth, errors=errors)
    return EXIT_OK


# -- sweep --------------------------------------------------------------------

def _grid_status(tmap) -> int:
    for message in tmap.messages:
        _log(message)
    frac = tmap.failure_fraction
    if frac > GRID_FAILURE_LIMIT:
        _log(f"{frac:.1%} of the grid failed (limit {GRID_FAILURE_LIMIT:.0%})")
        return EXIT_GRID
    return EXIT_OK


def _emit_map(ctx: Context, stem: str, tmap, command: str, params: dict, overlay=None):
    if "csv" in ctx.formats:
        meta = ctx.meta(command, **params)
        if "json" in ctx.formats:
            path = write_map(ctx.out / f"{stem}.csv", tmap, meta["config"],
                             {k: v for k, v in meta.items() if k != "config"})
        else:
            path = write_csv(ctx.out / f"{stem}.csv", ("control", "probe_GHz", "re_t", "im_t",
                                                        "abs_t_dB"), _rows(tmap))
        _log(f"wrote {path}")
        if overlay is not None:
            path = write_overlay(ctx.out / f"{stem}_overlay.csv", overlay,
                                 meta["config"] if "json" in ctx.formats else None)
            _log(f"wrote {path}")
    elif "json" in ctx.formats:
        write_json(ctx.out / f"{stem}.json", ctx.meta(command, **params))
    if "svg" in ctx.formats:
        points = [(c, f) for c, f, _ in overlay] if overlay else ()
        heatmap_svg(ctx.out / f"{stem}.svg", tmap.control_axis, tmap.probe_axis,
                    to_db(tmap.values), tmap.control_name, "probe (GHz)", "|t| (dB)", points)


def _rows(tmap):
    from .io import map_rows
    return map_rows(tmap)


def cmd_sweep(ctx: Context) -> int:
    args = ctx.args
    nx, ny = ctx.grid or (201, 401)
    control = parse_range(args.control, nx)
    probe = parse_range(args.probe, ny)
    tmap = qubit_sweep_s21(ctx.device, control, probe, workers=args.workers)
    _emit_map(ctx, "sweep", tmap, "sweep",
              {"control": args.control, "probe": args.probe, "grid": [len(control), len(probe)]})
    return _grid_status(tmap)


# -- pumpprobe ----------------------------------------------------------------

def pumpprobe_device(ctx: Context, omega01: float | None = None):
    """Device whose bound state sits at the configured ``omega01``."""
    device = ctx.device
    omega01 = ctx.run.pumpprobe.get("omega01") if omega01 is None else omega01
    if omega01 is None:
        return device
    omega_q = bare_frequency(float(omega01), device.qubit.g, device.band)
    return device.with_qubit(omega_q=omega_q)


def cmd_pumpprobe(ctx: Context) -> int:
    args = ctx.args
    device = pumpprobe_device(ctx, args.omega01)
    from .spectra import pump_probe_ladder
    ladder = pump_probe_ladder(device)
    freqs = ladder.transition_freqs
    omega_d = args.pump_freq if args.pump_freq is not None else (
        freqs[0] if args.pump_at == "01" else freqs[1])
    nx, ny = ctx.grid or (61, 801)
    rabi_max = args.rabi_max if args.rabi_max is not None else float(
        ctx.run.pumpprobe.get("rabi_max", 0.06))
    power = parse_range(args.power, nx) if args.power else np.linspace(0.0, rabi_max, nx)
    probe = parse_range(args.probe, ny) if args.probe else np.linspace(
        freqs[1] - 0.1, freqs[0] + 0.1, ny)
    tmap = pump_probe_map(device, float(omega_d), power, probe, ladder=ladder,
                          workers=args.workers)
    params = {"pump_at": args.pump_at, "omega_d": float(omega_d),
              "levels": list(ladder.level_freqs), "grid": [len(power), len(probe)]}
    _emit_map(ctx, f"pumpprobe_{args.pump_at}", tmap, "pumpprobe", params, tmap.overlay)
    return _grid_status(tmap)


# -- cool ---------------------------------------------------------------------

COOL_COLUMNS = ("delta_a_GHz", "omega_rabi0_GHz", "theta", "gamma_plus_GHz",
                "gamma_minus_GHz", "rho_minus", "rho_plus", "rho_minus_lindblad", "status")


def cool_row(device, omega_L: float, delta_a: float, rabi0: float, gamma_phi: float):
    """One row of the cooling table; ``status`` is ``ok`` or names the problem."""
    try:
        theta, omega = mixing_angle(delta_a, rabi0)
    except DomainError:
        return (delta_a, rabi0, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan,
                "degenerate")
    try:
        rates = cooling_rates(device.band, omega_L, omega, device.qubit.g, gamma_phi,
                              theta=theta)
        rho_m, rho_p = dressed_steady_state(rates)
        h, ops = dressed_lindblad_terms(rates)
        rho = lindblad_steady_state(h, ops)
        status = "ok"
        rho_l = float(rho[1, 1].real)
    except BandgapQEDError as exc:
        return (delta_a, rabi0, theta, math.nan, math.nan, math.nan, math.nan, math.nan,
                type(exc).__name__)
    return (delta_a, rabi0, theta, rates.gamma_plus, rates.gamma_minus, rho_m, rho_p, rho_l,
            status)


def cmd_cool(ctx: Context) -> int:
    args = ctx.args
    cool = ctx.run.cooling
    omega_L = args.omega_l if args.omega_l is not None else float(cool.get("omega_l", 7.6))
    omega = float(cool.get("omega", 0.15))
    nx, ny = ctx.grid or (21, 21)
    detuning = parse_range(args.detuning, nx) if args.detuning else np.array([0.0])
    rabi = parse_range(args.rabi, ny) if args.rabi else np.array([omega])
    rows = [cool_row(ctx.device, omega_L, float(d), float(r), args.gamma_phi)
            for d in detuning for r in rabi]
    bad = [r for r in rows if r[-1] != "ok"]
    for r in bad:
        _log(f"delta_a={r[0]:.9g}, rabi0={r[1]:.9g}: {r[-1]}")
    ctx.table("cool.csv", COOL_COLUMNS, rows, "cool", omega_L=omega_L,
              detuning=args.detuning, rabi=args.rabi, gamma_phi=args.gamma_phi)
    best = max((r for r in rows if r[-1] == "ok"), key=lambda r: r[5], default=None)
    if best is not None:
        print(f"max rho_minus = {best[5]:.6f} at delta_a = {best[0]:.6g} GHz, "
              f"Omega0 = {best[1]:.6g} GHz")
    return EXIT_OK


# -- fit-length ---------------------------------------------------------------

def _synthetic_samples(ctx: Context, n: int, noise: float, d_true: float):
    rng = np.random.default_rng(ctx.seed)
    inv_l = np.linspace(0.015, 0.045, n)
    gamma = ctx.device.gamma_ext * np.exp(-0.5 * d_true * inv_l)
    if noise > 0:
        gamma = gamma * (1.0 + noise * rng.standard_normal(n))
    return np.column_stack([gamma, inv_l])


def cmd_fit_length(ctx: Context) -> int:
    args = ctx.args
    if args.input is None and args.synthetic is None:
        raise UsageError("fit-length needs an input CSV or --synthetic N")
    if args.input is not None:
        try:
            cols = read_csv(args.input, ("gamma_GHz",))
            try:
                inv_l = read_csv(args.input, ("inv_L_per_mm",))["inv_L_per_mm"]
            except DomainError:
                inv_l = 1.0 / read_csv(args.input, ("L_mm",))["L_mm"]
        except DomainError as exc:
            raise UsageError(str(exc)) from None
        samples = np.column_stack([cols["gamma_GHz"], inv_l])
        source = str(args.input)
    else:
        samples = _synthetic_samples(ctx, args.synthetic, args.noise, args.d_true)
        source = f"synthetic n={args.synthetic} noise={args.noise} d={args.d_true}"
        ctx.table("synthetic_linewidths.csv", ("gamma_GHz", "inv_L_per_mm"), samples,
                  "fit-length", n=args.synthetic, noise=args.noise, d=args.d_true)
    d_fit, gamma_ext, r2 = fit_effective_length(samples)
    report = {"d_fit_mm": d_fit, "gamma_ext_GHz": gamma_ext, "r2": r2, "n": len(samples),
              "source": source, "d0_mm": ctx.device.d0}
    write_json(ctx.out / "fit_length.json", report)
    print(f"d_fit = {d_fit:.6f} mm, gamma_ext = {gamma_ext:.6g} GHz, r2 = {r2:.6f}")
    return EXIT_OK


# -- calibrate ----------------------------------------------------------------

def cmd_calibrate(ctx: Context) -> int:
    args = ctx.args
    base = ctx.run
    kappa = None if args.kappa is not None and args.kappa < 0 else args.kappa
    run = calibrate_device(omega0=args.omega0, delta=args.delta, kappa=kappa,
                           geometry=base.device.geometry, base=base)
    path = Path(args.output) if args.output else ctx.out / "device.cfg"
    save_config(run, path)
    d = run.device
    shift = resonant_shift(d.qubit.g, d.band.alpha)
    print(f"phase velocity {d.geometry.phase_velocity:.9f} mm/ns, alpha {d.band.alpha:.6f}, "
          f"g {d.qubit.g:.9f} GHz, shift {shift * 1e3:.6f} MHz")
    _log(f"wrote {path}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def _global_options(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; their defaults are suppressed so a
    # flag given before the subcommand is not overwritten
    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default(None),
                        help="device configuration file (default: paper device)")
    common.add_argument("--out", default=default("."), help="output directory")
    common.add_argument("--format", default=default("csv,json"),
                        help="comma list of csv,json,svg")
    common.add_argument("--grid", default=default(None), help="grid size <nx>x<ny>")
    common.add_argument("--seed", type=int, default=default(0),
                        help="seed for synthetic noise")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = argparse.ArgumentParser(prog="bandgap-qed", parents=[_global_options(False)],
                                     description="Band-gap waveguide QED simulator.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bands", parents=[common], help="band structure, DOS, Bloch modes")
    p.add_argument("--uniform", action="store_true", help="use a uniform line (no gap)")
    p.add_argument("--f-max", type=float, default=16.0)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("boundstate", parents=[common], help="bound-state solutions")
    p.add_argument("--omega-q", type=float)
    p.add_argument("--sweep", help="omega_q range start:stop[:n] (GHz)")
    p.add_argument("--linewidth", choices=("model", "crystal"), default="model",
                   help="gamma column from the leakage model or from device peaks")
    p.set_defaults(func=cmd_boundstate)

    p = sub.add_parser("sweep", parents=[common], help="transmission versus qubit frequency")
    p.add_argument("--control", default="6.9:8.1", help="omega_q range (GHz)")
    p.add_argument("--probe", default="6.9:8.1", help="probe range (GHz)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pumpprobe", parents=[common], help="pump-probe transmission map")
    p.add_argument("--pump-at", choices=("01", "12"), default="01")
    p.add_argument("--pump-freq", type=float, help="explicit pump frequency (GHz)")
    p.add_argument("--omega01", type=float, help="bound-state frequency to operate at (GHz)")
    p.add_argument("--rabi-max", type=float)
    p.add_argument("--power", help="Omega0 range start:stop[:n] (GHz)")
    p.add_argument("--probe", help="probe range start:stop[:n] (GHz)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_pumpprobe)

    p = sub.add_parser("cool", parents=[common], help="dressed-state cooling table")
    p.add_argument("--detuning", help="delta_a range start:stop[:n] (GHz)")
    p.add_argument("--rabi", help="Omega0 range start:stop[:n] (GHz)")
    p.add_argument("--omega-l", type=float, help="drive frequency (GHz)")
    p.add_argument("--gamma-phi", type=float, default=0.0)
    p.set_defaults(func=cmd_cool)

    p = sub.add_parser("fit-length", parents=[common], help="fit effective device length")
    p.add_argument("input", nargs="?", help="CSV with gamma_GHz and inv_L_per_mm (or L_mm)")
    p.add_argument("--synthetic", type=int, help="generate N synthetic samples instead")
    p.add_argument("--noise", type=float, default=0.0, help="relative noise for --synthetic")
    p.add_argument("--d-true", type=float, default=126.0)
    p.set_defaults(func=cmd_fit_length)

    p = sub.add_parser("calibrate", parents=[common], help="calibrate a device config")
    p.add_argument("--omega0", type=float, default=7.7)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--kappa", type=float, default=0.026,
                   help="band steepness to record (negative: use measured)")
    p.add_argument("--output", help="config file to write (default: OUT/device.cfg)")
    p.set_defaults(func=cmd_calibrate)
    return parser


_NEGATIVE = re.compile(r"^-\.?\d")


def _join_negative_values(argv):
    """Attach values such as ``-0.1:0.1:5`` to the preceding option, which
    argparse would otherwise read as an option name."""
    out = []
    for token in argv:
        if (_NEGATIVE.match(token) and out and out[-1].startswith("--")
                and "=" not in out[-1]):
            out[-1] = f"{out[-1]}={token}"
        else:
            out.append(token)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        ctx = Context(args)
        return args.func(ctx)
    except (UsageError, ConfigError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except BandgapQEDError as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
