"""Command-line front end.

Exit codes: 0 success, 2 configuration or usage errors, 3 simulation or
fit failures.  Every successful run writes one CSV (comment header with
`#` lines: command, seed, resolved parameters, version, backend; then a
column row; then data) plus a JSON manifest next to it.  Wall-clock
timing lives only in the manifest so the CSV stays byte-reproducible.

Heavy submodules are imported inside the handlers that need them to
keep cheap commands fast.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time

from .exceptions import ConfigError, DsimError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_CONFIG_SCHEMA = {
    "constants": ("d_gs", "gamma_e", "b_z", "a_hf"),
    "noise": ("sigma_b", "t2_star", "tau_c", "sigma_eps"),
    "drive": ("delta", "omega"),
    "ramps": ("t1", "t2"),
    "rf": ("b_rf", "f_rf"),
    "bare": ("omega", "detuning"),
    "nuclear": ("mode", "m_i"),
    "run": ("trajectories", "contrast"),
}


def _getfloat(section, key):
    raw = section[key]
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a number") from exc


def load_config(path: str | None):
    """Build an ExperimentConfig from an INI-style file.

    Missing file path (None) or empty file gives the full defaults.
    Unknown sections or keys are rejected rather than ignored.
    """
    from .experiments import (
        BareDriveConfig,
        DriveConfig,
        ExperimentConfig,
        RampConfig,
        RFConfig,
    )
    from .noise import NoiseModel, calibrate_bath
    from .spin import NuclearConfig, PhysicalConstants

    parser = configparser.ConfigParser()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=path)

    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _CONFIG_SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    def sec(name):
        return parser[name] if parser.has_section(name) else {}

    c = sec("constants")
    constants = PhysicalConstants(
        d_gs=_getfloat(c, "d_gs") if "d_gs" in c else 2870.0,
        gamma_e=_getfloat(c, "gamma_e") if "gamma_e" in c else 2.802,
        b_z=_getfloat(c, "b_z") if "b_z" in c else 12.0,
        a_hf=_getfloat(c, "a_hf") if "a_hf" in c else 2.16,
    )

    n = sec("noise")
    if "sigma_b" in n and "t2_star" in n:
        raise ConfigError("give either sigma_b or t2_star in [noise], not both")
    if "sigma_b" in n:
        sigma_b = _getfloat(n, "sigma_b")
    else:
        t2_star = _getfloat(n, "t2_star") if "t2_star" in n else 0.93
        sigma_b = calibrate_bath(t2_star, constants.gamma_e)
    tau_c = math.inf
    if "tau_c" in n:
        raw = n["tau_c"].strip().lower()
        tau_c = math.inf if raw in ("inf", "infinite") else _getfloat(n, "tau_c")
    noise = NoiseModel(
        sigma_b=sigma_b,
        tau_c=tau_c,
        sigma_eps=_getfloat(n, "sigma_eps") if "sigma_eps" in n else 0.0,
    )

    d = sec("drive")
    drive = DriveConfig(
        delta=_getfloat(d, "delta") if "delta" in d else 0.4,
        omega=_getfloat(d, "omega") if "omega" in d else 1.6,
    )
    r = sec("ramps")
    ramps = RampConfig(
        t1=_getfloat(r, "t1") if "t1" in r else 50.0,
        t2=_getfloat(r, "t2") if "t2" in r else 50.0,
    )
    rf_s = sec("rf")
    rf = RFConfig(
        b_rf=_getfloat(rf_s, "b_rf") if "b_rf" in rf_s else 0.1389,
        f_rf=_getfloat(rf_s, "f_rf") if "f_rf" in rf_s else None,
    )
    b = sec("bare")
    bare = BareDriveConfig(
        omega=_getfloat(b, "omega") if "omega" in b else 10.0,
        detuning=_getfloat(b, "detuning") if "detuning" in b else 4.0,
    )

    nu = sec("nuclear")
    mode = nu["mode"].strip().lower() if "mode" in nu else "mixture"
    if mode == "mixture":
        nuclear = NuclearConfig.mixture()
    elif mode == "single":
        m_i = int(_getfloat(nu, "m_i")) if "m_i" in nu else 0
        nuclear = NuclearConfig.single(m_i)
    else:
        raise ConfigError(f"[nuclear] mode must be 'mixture' or 'single', got {mode!r}")

    run = sec("run")
    trajectories = 2000
    if "trajectories" in run:
        trajectories = int(_getfloat(run, "trajectories"))
    contrast = _getfloat(run, "contrast") if "contrast" in run else 0.3

    try:
        return ExperimentConfig(
            constants=constants,
            noise=noise,
            drive=drive,
            ramps=ramps,
            rf=rf,
            bare=bare,
            nuclear=nuclear,
            trajectories=trajectories,
            contrast=contrast,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _config_meta(config) -> list[tuple[str, str]]:
    """Flat, order-stable key=value view of a resolved config."""
    pairs = [
        ("constants.d_gs", config.constants.d_gs),
        ("constants.gamma_e", config.constants.gamma_e),
        ("constants.b_z", config.constants.b_z),
        ("constants.a_hf", config.constants.a_hf),
        ("noise.sigma_b", config.noise.sigma_b),
        ("noise.tau_c", config.noise.tau_c),
        ("noise.sigma_eps", config.noise.sigma_eps),
        ("drive.delta", config.drive.delta),
        ("drive.omega", config.drive.omega),
        ("ramps.t1", config.ramps.t1),
        ("ramps.t2", config.ramps.t2),
        ("rf.b_rf", config.rf.b_rf),
        ("rf.f_rf", config.rf.f_rf),
        ("bare.omega", config.bare.omega),
        ("bare.detuning", config.bare.detuning),
        ("nuclear.projections", ";".join(str(p) for p in config.nuclear.projections)),
        ("nuclear.weights", ";".join(repr(w) for w in config.nuclear.weights)),
        ("run.trajectories", config.trajectories),
        ("run.contrast", config.contrast),
    ]
    out = []
    for key, val in pairs:
        if isinstance(val, float):
            out.append((key, repr(val)))
        else:
            out.append((key, str(val)))
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_csv(path: str, columns, rows, meta: list[tuple[str, str]]) -> None:
    from . import __version__
    from .kernels import backend_name

    lines = [f"# dsim {__version__}", f"# backend: {backend_name()}"]
    lines += [f"# {key} = {val}" for key, val in meta]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_manifest(path: str, command: str, seed, outputs, meta, duration: float) -> None:
    from . import __version__
    from .kernels import backend_name

    manifest = {
        "command": command,
        "version": __version__,
        "backend": backend_name(),
        "master_seed": seed,
        "outputs": list(outputs),
        "duration_s": duration,
        "config": {k: v for k, v in meta},
    }
    with open(path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _series_rows(series, abscissa_name: str, value_name: str):
    columns = [abscissa_name, value_name, "stderr"]
    extras = sorted(series.extra)
    columns += extras
    rows = []
    for k in range(series.abscissa.shape[0]):
        row = [float(series.abscissa[k]), float(series.mean[k]), float(series.stderr[k])]
        row += [float(series.extra[name][k]) for name in extras]
        rows.append(row)
    return columns, rows


def _cmd_spectrum(args, config):
    from .spin import dressed_spectrum

    sp = dressed_spectrum(
        config.drive.delta, config.drive.omega, gamma_e=config.constants.gamma_e
    )
    columns = [
        "delta_MHz", "omega_MHz", "b_G",
        "e_g_MHz", "e_d_MHz", "e_e_MHz",
        "w_dg_MHz", "w_eg_MHz", "sz_dg", "pop_g0",
    ]
    rows = [[
        config.drive.delta, config.drive.omega, 0.0,
        sp.e_g, sp.e_d, sp.e_e, sp.w_dg, sp.w_eg,
        sp.s_overlap, float(abs(sp.state_g[1]) ** 2),
    ]]
    return columns, rows, {}


def _cmd_sweetspot(args, config):
    import numpy as np

    from .spin import dressed_spectrum, find_sweet_spot_ratio, gap_sensitivity

    gamma = config.constants.gamma_e
    columns = [
        "delta_MHz", "ratio", "omega_MHz",
        "curv_below_MHz_per_G2", "curv_above_MHz_per_G2", "quartic_slope",
    ]
    rows = []
    for delta in (0.4, 2.0):
        ratio = find_sweet_spot_ratio(delta, gamma_e=gamma)
        omega = ratio * delta
        below = gap_sensitivity(delta, 0.95 * omega, 0.0, order=2, gamma_e=gamma)
        above = gap_sensitivity(delta, 1.05 * omega, 0.0, order=2, gamma_e=gamma)
        # keep gamma*b/delta in a fixed band so the quartic term dominates
        bs = np.geomspace(0.05, 0.2, 7) * (delta / 2.0)
        w0 = dressed_spectrum(delta, omega, gamma_e=gamma).w_dg
        dw = np.array([
            abs(dressed_spectrum(delta, omega, b=float(b), gamma_e=gamma).w_dg - w0)
            for b in bs
        ])
        slope = float(np.polyfit(np.log(bs), np.log(dw), 1)[0])
        rows.append([delta, ratio, omega, below, above, slope])
    return columns, rows, {}


def _cmd_odmr(args, config):
    from .experiments import run_odmr

    series = run_odmr(config, master_seed=args.seed, shot_noise=args.shot_noise)
    columns, rows = _series_rows(series, "freq_MHz", "signal")
    return columns, rows, {}


def _cmd_fid(args, config):
    from .experiments import run_fid_bare, run_fid_cwdd

    if args.mode == "bare":
        series = run_fid_bare(config, master_seed=args.seed, shot_noise=args.shot_noise)
    else:
        series = run_fid_cwdd(config, master_seed=args.seed, shot_noise=args.shot_noise)
    columns, rows = _series_rows(series, "delay_us", "signal")
    return columns, rows, {"mode": args.mode}


def _cmd_rabi(args, config):
    from .experiments import run_rabi

    series = run_rabi(
        config, mode=args.mode, master_seed=args.seed, shot_noise=args.shot_noise
    )
    columns, rows = _series_rows(series, "duration_us", "signal")
    return columns, rows, {"mode": args.mode}


def _cmd_notgate(args, config):
    from .experiments import run_not_gate_train

    series = run_not_gate_train(config, mode=args.mode, master_seed=args.seed)
    columns, rows = _series_rows(series, "gates", "f")
    return columns, rows, {"mode": args.mode}


def _cmd_t2scan(args, config):
    from .experiments import run_t2prime_scan

    series = run_t2prime_scan(config, master_seed=args.seed)
    columns, rows = _series_rows(series, "omega_MHz", "t2prime_us")
    return columns, rows, {}


def _read_xy_csv(path: str):
    import numpy as np

    xs, ys = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                continue  # header row
            xs.append(x)
            ys.append(y)
    if len(xs) < 2:
        from .exceptions import DegenerateDataError

        raise DegenerateDataError(f"{path} contains no numeric x,y rows")
    return np.asarray(xs), np.asarray(ys)


def _cmd_fit(args, config):
    from .analysis import (
        fit_damped_cosine,
        fit_gaussian_decay,
        fit_three_tone,
    )

    x, y = _read_xy_csv(args.input)
    fitters = {
        "auto": fit_gaussian_decay,
        "gaussian": lambda d: fit_gaussian_decay(d, allow_reroute=False),
        "cosine": fit_damped_cosine,
        "threetone": fit_three_tone,
    }
    result = fitters[args.model]((x, y))
    columns = ["param", "value", "sigma"]
    rows = []
    for name in result.params:
        rows.append([name, result.params[name], result.sigmas.get(name, math.nan)])
    rows.append(["residual_rms", result.residual_rms, math.nan])
    rows.append(["n_iterations", float(result.n_iterations), math.nan])
    rows.append(["converged", 1.0 if result.converged else 0.0, math.nan])
    return columns, rows, {"model": result.model, "input": args.input}


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "sweetspot": _cmd_sweetspot,
    "odmr": _cmd_odmr,
    "fid": _cmd_fid,
    "rabi": _cmd_rabi,
    "notgate": _cmd_notgate,
    "t2scan": _cmd_t2scan,
    "fit": _cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsim",
        description="Driven spin-1 qubit simulator: spectroscopy, dephasing, "
        "protected gates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trajectories=True, shots=True, mode=None):
        p.add_argument("--config", help="INI config file (defaults if omitted)")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", help="output CSV path (default dsim_<command>.csv)")
        if trajectories:
            p.add_argument(
                "--trajectories", type=int, help="override [run] trajectories"
            )
        if shots:
            p.add_argument(
                "--shot-noise", type=int, default=None, metavar="N",
                help="Poisson shot sampling with N shots per point",
            )
        if mode is not None:
            p.add_argument(
                "--mode", choices=("bare", "cwdd"), default=mode,
                help=f"drive mode (default {mode})",
            )

    common(sub.add_parser("spectrum", help="dressed energies and gap"),
           trajectories=False, shots=False)
    common(sub.add_parser("sweetspot", help="curvature-free drive ratio per detuning"),
           trajectories=False, shots=False)
    common(sub.add_parser("odmr", help="swept-probe resonance scan"))
    common(sub.add_parser("fid", help="free induction decay"), mode="bare")
    common(sub.add_parser("rabi", help="driven oscillation scan"), mode="bare")
    common(sub.add_parser("notgate", help="repeated pi-gate fidelity train"),
           shots=False, mode="bare")
    common(sub.add_parser("t2scan", help="driven coherence time vs drive amplitude"),
           shots=False)

    fit_p = sub.add_parser("fit", help="fit a decay model to CSV data")
    fit_p.add_argument("input", help="CSV with x in column 1, y in column 2")
    fit_p.add_argument(
        "--model", choices=("auto", "gaussian", "cosine", "threetone"),
        default="auto", help="fit model (default auto-detect)",
    )
    fit_p.add_argument("--out", help="output CSV path (default dsim_fit.csv)")
    fit_p.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)

    started = time.monotonic()
    try:
        if args.command == "fit":
            config = None
        else:
            config = load_config(args.config)
            if getattr(args, "trajectories", None) is not None:
                if args.trajectories < 1:
                    raise ConfigError("--trajectories must be >= 1")
                from dataclasses import replace

                config = replace(config, trajectories=args.trajectories)
    except (ConfigError, configparser.Error, OSError, ValueError) as exc:
        print(f"dsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        columns, rows, extra_meta = _HANDLERS[args.command](args, config)
    except (ConfigError, OSError) as exc:
        print(f"dsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DsimError, ValueError) as exc:
        print(f"dsim: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    meta = [("command", args.command), ("seed", str(args.seed))]
    meta += sorted(extra_meta.items())
    if getattr(args, "shot_noise", None) is not None:
        meta.append(("shot_noise", str(args.shot_noise)))
    if config is not None:
        meta += _config_meta(config)

    out = args.out or f"dsim_{args.command}.csv"
    write_csv(out, columns, rows, meta)
    _write_manifest(out, args.command, args.seed, [out], meta, time.monotonic() - started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
