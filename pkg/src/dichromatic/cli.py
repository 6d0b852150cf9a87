"""Command-line front end.

Subcommands: spectrum, optimize, verify, montecarlo, steady. Every command
reads one JSON config (``--config``), writes its outputs atomically into the
output directory and exits with 0 (ok), 1 (config error), 2 (I/O error) or
3 (verification failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import config as cfgmod
from . import langevin, sidebands, verification
from .model import ForceSignal, SystemParams, compensation_pumps, k_sql, steady_state
from .optimize import minimize_over_K
from .spectra import (
    StrategyKind,
    StrategySpec,
    sf_combined,
    sf_raw,
    sf_sql,
    strategy_row,
    strategy_sf,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3
OUT_ENV = "DICHROMATIC_OUT"
SPECTRUM_HEADER = ("omega_rad_s", "K_rad_s", "S_f_raw", "S_f_combined", "S_f_sidebands",
                   "S_f_filtered", "S_SQL")


class VerificationFailure(RuntimeError):
    pass


# -- output helpers --------------------------------------------------------

def fmt(x) -> str:
    """Round-trip decimal formatting with 17 significant digits."""
    return format(float(x), ".17g")


def write_atomic(path: str, data) -> None:
    """Write via a temp file in the same directory and rename into place."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _row_dump(row) -> dict:
    return {"label": row.label, "omega": row.omega,
            "coeffs": {k: [complex(v).real, complex(v).imag] for k, v in sorted(row.coeffs.items())}}


def params_at(params: SystemParams, Omega: float, K: float) -> SystemParams:
    """Copy of ``params`` whose probe power equals ``K`` at frequency ``Omega``."""
    return params.with_K0(K * (params.gamma ** 2 + Omega ** 2) / params.gamma ** 2)


# -- commands ----------------------------------------------------------------

def spectrum_table(cfg: cfgmod.RunConfig):
    """Rows of (Omega, K, raw, combined, sidebands, filtered, SQL); skipped points listed separately."""
    params = cfg.params
    sb = cfg.sidebands
    rows, skipped = [], []
    for w in cfg.grid:
        ks = k_sql(params, w)
        if cfg.k_sweep is not None:
            if ks == 0:
                skipped.append(float(w))
                continue
            Ks = [m * ks for m in cfg.k_sweep]
        else:
            Ks = [float(params.K0 * params.gamma ** 2 / (params.gamma ** 2 + w ** 2))]
        for K in Ks:
            raw = sf_raw(params, w, K)
            comb = sf_combined(params, w, K)
            side = sidebands.sf_with_sidebands(params, w, K, exact=sb["exact"]) if sb["enabled"] else math.nan
            filt = sidebands.sf_filtered(params, w, K, exact=sb["exact"]) if sb["enabled"] and sb["filter"] else math.nan
            rows.append((w, K, raw, comb, side, filt, sf_sql(params, w)))
    return rows, skipped


def cmd_spectrum(cfg, out_dir, formats) -> dict:
    rows, skipped = spectrum_table(cfg)
    if not rows:
        raise cfgmod.ConfigError("config error: no evaluable grid points")
    paths = {"csv": os.path.join(out_dir, "spectrum.csv")}
    write_atomic(paths["csv"], csv_text(SPECTRUM_HEADER, rows))
    params = cfg.params
    if "json" in formats:
        dump = []
        omegas = sorted({r[0] for r in rows})
        for w, K in ((r[0], r[1]) for r in rows):
            p = params_at(params, w, K)
            dump.append({"omega": w, "K": K, "rows": {
                s.kind.value + ("" if s.varphi is None else f"@{s.varphi}"):
                    _row_dump(strategy_row(p, w, s, exact=cfg.sidebands["exact"])) for s in cfg.strategies}})
        paths["json"] = os.path.join(out_dir, "spectrum.json")
        write_atomic(paths["json"], json_text({"params": params.to_dict(), "n_omega": len(omegas),
                                               "skipped_omega": skipped, "points": dump}))
    if "svg" in formats:
        from .plotting import spectrum_figure
        arr = np.array(rows, dtype=float)
        mult = cfg.k_sweep
        if mult is not None:
            pick = min(mult, key=lambda m: abs(math.log(m)))
            sel = np.isclose(arr[:, 1], pick * np.hypot(params.gamma_m, arr[:, 0]), rtol=1e-12)
            title = f"K = {pick:g} x K_SQL(Omega)"
        else:
            sel = np.ones(len(arr), dtype=bool)
            title = f"K(0) = {params.K0:.4g} rad/s"
        a = arr[sel]
        curves = {name: a[:, i] for i, name in enumerate(SPECTRUM_HEADER[2:6], start=2)
                  if np.all(np.isfinite(a[:, i]))}
        paths["svg"] = os.path.join(out_dir, "spectrum.svg")
        write_atomic(paths["svg"], spectrum_figure(a[:, 0], curves, a[:, 6], title))
    return {"command": "spectrum", "rows": len(rows), "skipped_omega": skipped, "files": paths}


def _objectives(cfg, params, w):
    """name -> (f(K), reference K for the search, analytic optimum or None)."""
    sb = cfg.sidebands
    ks = float(k_sql(params, w))
    out = {}
    for s in cfg.strategies:
        if s.kind in (StrategyKind.RAW_MINUS_AMPLITUDE, StrategyKind.PHASE_PLUS):
            out[s.kind.value] = (lambda K: sf_raw(params, w, K), ks, ks)
        elif s.kind in (StrategyKind.COMBINED_AMPLITUDE, StrategyKind.COMBINED_PHASE):
            out[s.kind.value] = (lambda K: sf_combined(params, w, K), ks, None)
        elif s.kind is StrategyKind.GENERALIZED_PAIR:
            spec = s
            out[f"generalized_pair@{s.varphi:g}"] = (
                lambda K, spec=spec: strategy_sf(params_at(params, w, float(K)), w, spec), ks, None)
    if sb["enabled"]:
        k36 = float(sidebands.optimal_K_sidebands(params, w))
        out["sidebands"] = (lambda K: sidebands.sf_with_sidebands(params, w, K, exact=sb["exact"]),
                            k36, None if sb["exact"] else k36)
        if sb["filter"]:
            k_f = 4 * params.omega_m ** 2 / params.gamma
            out["filtered"] = (lambda K: sidebands.sf_filtered(params, w, K, exact=sb["exact"]), k_f, None)
    return out


def cmd_optimize(cfg, out_dir, formats) -> dict:
    params = cfg.params
    report = {"command": "optimize", "points": [], "checks": []}
    worst_36 = 0.0
    for w in cfg.grid:
        w = float(w)
        entry = {"omega": w, "S_SQL": float(sf_sql(params, w)), "strategies": {}}
        for name, (f, k_ref, k_expected) in _objectives(cfg, params, w).items():
            if k_ref <= 0:
                entry["strategies"][name] = {"K_opt": None, "S_f_min": None, "note": "degenerate point"}
                continue
            K, smin = minimize_over_K(f, k_ref)
            rec = {"K_opt": K, "S_f_min": smin}
            hi = 1e6 * k_ref
            if K >= hi * (1 - 1e-9):
                rec["note"] = "no interior minimum; S_f decreases monotonically with K"
            if k_expected is not None:
                rec["K_expected"] = k_expected
                rec["K_rel_error"] = abs(K / k_expected - 1)
                if name == "sidebands":
                    worst_36 = max(worst_36, rec["K_rel_error"])
            if name == "filtered" and params.gamma_m == 0 and not cfg.sidebands["exact"]:
                rec["S_f_expected"] = float(sidebands.filtered_minimum(params, w))
            entry["strategies"][name] = rec
        report["points"].append(entry)
    failed = False
    if cfg.sidebands["enabled"] and not cfg.sidebands["exact"]:
        check = {"name": "sideband_optimal_power", "deviation": worst_36, "tolerance": 1e-9,
                 "passed": worst_36 <= 1e-9}
        report["checks"].append(check)
        failed = not check["passed"]
    paths = {"json": os.path.join(out_dir, "optimize.json")}
    write_atomic(paths["json"], json_text(report))
    names = sorted({n for p in report["points"] for n in p["strategies"]})
    header = ["omega_rad_s", "S_SQL"] + [f"{n}:{c}" for n in names for c in ("K_opt", "S_f_min")]
    table = []
    for p in report["points"]:
        row = [p["omega"], p["S_SQL"]]
        for n in names:
            rec = p["strategies"].get(n, {})
            row += [rec.get("K_opt") if rec.get("K_opt") is not None else math.nan,
                    rec.get("S_f_min") if rec.get("S_f_min") is not None else math.nan]
        table.append(row)
    paths["csv"] = os.path.join(out_dir, "optimize.csv")
    write_atomic(paths["csv"], csv_text(header, table))
    if "svg" in formats:
        from .plotting import optimize_figure
        omega = np.array([p["omega"] for p in report["points"]])
        interior = [n for n in names if all("note" not in p["strategies"].get(n, {}) for p in report["points"])]
        k_opt = {n: np.array([p["strategies"][n]["K_opt"] for p in report["points"]]) for n in interior}
        s_min = {n: np.array([p["strategies"][n]["S_f_min"] for p in report["points"]]) for n in interior}
        paths["svg"] = os.path.join(out_dir, "optimize.svg")
        write_atomic(paths["svg"], optimize_figure(omega, k_opt, s_min, sf_sql(params, omega)))
    summary = {"command": "optimize", "points": len(report["points"]), "checks": report["checks"], "files": paths}
    if failed:
        raise VerificationFailure(json_text(summary))
    return summary


def cmd_verify(cfg, out_dir, formats, fault=None) -> dict:
    params = cfg.params
    grid = np.unique(np.concatenate([cfg.grid, verification.canonical_grid(params, 11)]))
    results = verification.run_suite(params, grid, fault=fault)
    report = {"command": "verify", "passed": verification.all_passed(results),
              "fault": fault, "checks": [r.to_dict() for r in results]}
    path = os.path.join(out_dir, "verify.json")
    write_atomic(path, json_text(report))
    report["files"] = {"json": path}
    if not report["passed"]:
        raise VerificationFailure(json_text(report))
    return report


def cmd_montecarlo(cfg, out_dir, formats, seed) -> dict:
    mc = cfg.montecarlo
    params = cfg.params
    if "K0" not in cfg.raw["power"] and "K0_over_gamma_m" not in cfg.raw["power"]:
        params = params.with_K0(100 * params.gamma_m)
    strategies = [StrategySpec(s) for s in mc["strategies"]]
    detect = next((s for s in strategies if s.kind is StrategyKind.COMBINED_AMPLITUDE), strategies[0])
    force_cfg = mc.get("force") or {}
    tau = force_cfg.get("tau", 0.05)
    threshold = float(math.sqrt(langevin.analytic_sf(params, 0.0, detect) / tau))
    f_s0 = force_cfg.get("f_s0", force_cfg.get("f_s0_over_threshold", 0.0) * threshold)
    psi = force_cfg.get("psi_f", -math.pi / 2)
    t_start = force_cfg.get("t_start", 0.5 * mc["duration"])
    base = dict(duration=mc["duration"], dt=mc.get("dt"), decimation=mc.get("decimation"),
                include_sidebands=mc.get("include_sidebands", False),
                strategies=tuple(s.kind.value for s in strategies))
    try:
        noise_run = langevin.simulate(params, langevin.SimConfig(seed=seed, **base))
        signal_run = langevin.simulate(params, langevin.SimConfig(
            seed=seed + 1, force=ForceSignal(f_s0, psi, tau, t_start), **base))
    except langevin.SimulationError as exc:
        raise VerificationFailure(str(exc)) from None
    paths = {}
    estimates, analytic, omega = {}, {}, None
    for s in strategies:
        est = langevin.measure_strategy(noise_run, params, s, segment_length=mc.get("segment_length"))
        omega = est.omega
        estimates[s.kind.value], analytic[s.kind.value] = est.sf_estimate, est.sf_analytic
        path = os.path.join(out_dir, f"psd_{s.kind.value}.csv")
        write_atomic(path, csv_text(("omega_rad_s", "S_f_estimate", "S_f_analytic"),
                                    zip(est.omega, est.sf_estimate, est.sf_analytic)))
        paths[f"psd_{s.kind.value}"] = path
    band = (0.2 * params.gamma_m, 20 * params.gamma_m)
    agreement = {k: langevin.band_agreement(langevin.measure_strategy(
        noise_run, params, StrategySpec(k), segment_length=mc.get("segment_length")), *band)
        for k in estimates}
    det = langevin.detect_force(signal_run, params, detect, tau, t_start, psi)
    report = {
        "command": "montecarlo", "seed": seed, "noise_seed": seed, "signal_seed": seed + 1,
        "K0": params.K0, "params_hash": noise_run.metadata["params_hash"],
        "dt": noise_run.metadata["dt"], "decimation": noise_run.metadata["decimation"],
        "detection": {"strategy": detect.kind.value, "f_s0_injected": f_s0, "threshold": threshold,
                      "expected_snr": f_s0 / threshold, "estimate": det.estimate,
                      "std_error": det.std_error, "snr": det.snr, "detected": det.detected,
                      "noise_windows": len(det.noise_estimates)},
        "psd_band_median_deviation": agreement,
    }
    paths["report"] = os.path.join(out_dir, "montecarlo.json")
    write_atomic(paths["report"], json_text(report))
    if "svg" in formats:
        from .plotting import montecarlo_figure
        paths["svg"] = os.path.join(out_dir, "montecarlo.svg")
        write_atomic(paths["svg"], montecarlo_figure(omega, estimates, analytic, band))
    report["files"] = paths
    return report


def cmd_steady(cfg, out_dir, formats) -> dict:
    st = cfg.steady
    params = cfg.params
    g2 = 2.0 / params.gamma
    mf = steady_state(params, st["A_plus"], st["A_minus"], paper_mode=st["paper_mode"])
    drive = params.eta * mf.C_plus * np.conj(mf.C_minus)
    comp = []
    for ratio in st["eta_e_over_eta"]:
        eta_e = ratio * params.eta
        prod = compensation_pumps(params, eta_e, mf.C_plus, mf.C_minus)
        resid = abs(drive + eta_e * prod)
        comp.append({"eta_e": eta_e, "E_plus_E_minus_conj": complex(prod),
                     "D_residual": resid / params.gamma_m if params.gamma_m else resid,
                     "relative_residual": resid / abs(drive) if abs(drive) else 0.0})
    report = {
        "command": "steady", "paper_mode": st["paper_mode"],
        "C_plus": complex(mf.C_plus), "C_minus": complex(mf.C_minus), "D": complex(mf.D),
        "nu": mf.nu, "iterations": mf.iterations,
        "nu_g2_A_plus2": mf.nu * g2 * st["A_plus"] ** 2,
        "nu_g2_A_minus2": mf.nu * g2 * st["A_minus"] ** 2,
        "compensation": comp,
    }
    path = os.path.join(out_dir, "steady.json")
    write_atomic(path, json_text(report))
    report["files"] = {"json": path}
    return report


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dichromatic", description=__doc__.splitlines()[0])
    parser.add_argument("--schema", action="store_true", help="print the config JSON schema and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults used when omitted)")
    common.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    common.add_argument("--seed", type=int, help="64-bit seed (overrides the config)")
    common.add_argument("--format", action="append", choices=("csv", "json", "svg"), dest="formats",
                        help="extra output format; may be repeated")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("spectrum", parents=[common], help="force-referred spectra on a grid")
    sub.add_parser("optimize", parents=[common], help="optimal probe power per frequency")
    v = sub.add_parser("verify", parents=[common], help="closed forms vs brute-force solver")
    v.add_argument("--inject-fault", choices=verification.FAULTS, help=argparse.SUPPRESS)
    sub.add_parser("montecarlo", parents=[common], help="time-domain PSD and detection run")
    sub.add_parser("steady", parents=[common], help="mean-field solution and drive compensation")
    return parser


def _output_dir(args, cfg) -> str:
    if args.out:
        return args.out
    return os.environ.get(OUT_ENV) or cfg.output["dir"]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        sys.stdout.write(json_text(cfgmod.schema_document()))
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.build({})
        seed = args.seed if args.seed is not None else cfg.seed
        if not 0 <= seed < 2 ** 64:
            raise cfgmod.ConfigError("seed must be an unsigned 64-bit integer")
        formats = set(cfg.output["formats"]) | set(args.formats or ())
        out_dir = _output_dir(args, cfg)
        if args.command == "spectrum":
            result = cmd_spectrum(cfg, out_dir, formats)
        elif args.command == "optimize":
            result = cmd_optimize(cfg, out_dir, formats)
        elif args.command == "verify":
            result = cmd_verify(cfg, out_dir, formats, fault=args.inject_fault)
        elif args.command == "montecarlo":
            result = cmd_montecarlo(cfg, out_dir, formats, seed)
        else:
            result = cmd_steady(cfg, out_dir, formats)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailure as exc:
        sys.stdout.write(str(exc))
        print("error: verification failed", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(json_text(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
