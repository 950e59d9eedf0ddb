"""Command-line front end.

One subcommand per experiment plus `theory` and `complexity` for the
closed-form predictors. Runs print a JSON summary to stdout, or write
the full CSV/JSON/SVG file set when --out is given. A JSON config file
mirroring RunConfig can seed any run; explicit flags override it.

Exit codes: 0 success, 1 argument or configuration error, 2 numerical
breakdown in every round, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .channel import default_pdp, load_pdp
from .numerics import NumericalBreakdownError
from .theory import (
    DerivedConstants,
    coherence_chain,
    coherence_recursion,
    complexity_counts,
    mrls_mse_predict,
    rls_mse,
)
from .harness import (
    config_from_dict,
    db,
    emit_outputs,
    run_impulse,
    run_tracking,
    run_uncertainty,
    measure_layer_acf,
    series_summary,
    snr_db_to_noise_variance,
    standard_config,
    sweep_snr,
)

__all__ = ["main", "build_parser"]


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--taps", type=int, help="filter/channel length M")
    common.add_argument("--lambda", dest="lam", type=float, help="forgetting factor")
    common.add_argument("--coherence", type=float, help="channel coherence length N")
    common.add_argument(
        "--snr-db",
        action="append",
        type=float,
        help="SNR point in dB; repeat for sweeps (single-point runs use the last value)",
    )
    common.add_argument("--rounds", type=int, help="Monte Carlo rounds")
    common.add_argument("--samples", type=int, help="samples per round")
    common.add_argument("--layers-max", type=int, help="layer stack depth")
    common.add_argument("--z", type=float, help="residual-power smoothing constant")
    common.add_argument("--delta", type=float, help="initial inverse-correlation scale")
    common.add_argument("--seed", type=int, help="base RNG seed")
    common.add_argument("--input", choices=["bpsk", "gauss"], help="regressor symbol type")
    common.add_argument("--pdp-file", help="power-delay profile, one power per line")
    common.add_argument("--impulse-at", type=int, help="sample index of the abrupt change")
    common.add_argument("--impulse-gain", type=float, help="tap multiplier at the change")
    common.add_argument(
        "--uncertainty",
        action="append",
        type=float,
        help="noise-power uncertainty u; repeatable",
    )
    common.add_argument("--out", help="output directory for CSV/JSON/SVG files")
    common.add_argument("--config", help="JSON config file; flags override it")

    parser = _Parser(prog="mrls", description="Layered RLS tracking experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("track", parents=[common], help="fixed-SNR tracking run")
    sub.add_parser("sweep-snr", parents=[common], help="steady-state metrics per SNR point")
    sub.add_parser("impulse", parents=[common], help="tracking through an abrupt change")
    sub.add_parser("uncertainty", parents=[common], help="noise-power uncertainty sweep")
    acf = sub.add_parser("acf", parents=[common], help="effective-IR autocorrelation runs")
    acf.add_argument("--m-max", type=int, help="largest ACF lag (default n_samples / 10)")
    sub.add_parser("theory", parents=[common], help="closed-form predictions")
    comp = sub.add_parser("complexity", parents=[common], help="per-sample operation counts")
    comp.add_argument("--layers-opt", type=int, help="selected depth (default 1)")
    comp.add_argument("--n-itr", type=int, default=4, help="coordinate-descent iterations")
    return parser


def _config_from_args(args):
    if args.config:
        cfg = config_from_dict(json.loads(Path(args.config).read_text()))
    else:
        cfg = standard_config()

    ch_kw = {}
    fp_kw = {}
    run_kw = {}
    if args.taps is not None:
        ch_kw["n_taps"] = args.taps
        fp_kw["n_taps"] = args.taps
        ch_kw["pdp"] = default_pdp(args.taps)
        if args.lam is None and args.config is None:
            fp_kw["lam"] = 1.0 - 1.0 / (2.0 * args.taps)
    if args.pdp_file is not None:
        ch_kw["pdp"] = load_pdp(args.pdp_file, ch_kw.get("n_taps", cfg.channel.n_taps))
    if args.lam is not None:
        fp_kw["lam"] = args.lam
    if args.coherence is not None:
        ch_kw["coherence"] = args.coherence
    if args.snr_db:
        run_kw["snr_db_list"] = list(args.snr_db)
        sigma2 = snr_db_to_noise_variance(args.snr_db[-1])
        ch_kw["noise_variance"] = sigma2
        fp_kw["noise_variance"] = sigma2
    if args.input is not None:
        ch_kw["input_kind"] = args.input
    if args.impulse_at is not None:
        ch_kw["impulse_time"] = args.impulse_at
    if args.impulse_gain is not None:
        ch_kw["impulse_gain"] = args.impulse_gain
    if args.layers_max is not None:
        fp_kw["l_max"] = args.layers_max
    if args.z is not None:
        fp_kw["z"] = args.z
    if args.delta is not None:
        fp_kw["delta"] = args.delta
    if args.rounds is not None:
        run_kw["rounds"] = args.rounds
    if args.samples is not None:
        run_kw["n_samples"] = args.samples
    if args.seed is not None:
        run_kw["base_seed"] = args.seed
    if args.uncertainty:
        run_kw["noise_uncertainty"] = args.uncertainty[-1]
    if args.out is not None:
        run_kw["output_dir"] = args.out

    return dataclasses.replace(
        cfg,
        channel=dataclasses.replace(cfg.channel, **ch_kw),
        filter=dataclasses.replace(cfg.filter, **fp_kw),
        **run_kw,
    )


def _finish(result, summary, out_dir):
    if out_dir:
        for path in emit_outputs(result, out_dir):
            print(path)
    else:
        print(json.dumps(summary, indent=2))
    return 0


def _cmd_track(args):
    cfg = _config_from_args(args)
    series = run_tracking(cfg)
    return _finish(series, series_summary(series), cfg.output_dir)


def _cmd_sweep(args):
    cfg = _config_from_args(args)
    rows = sweep_snr(cfg)
    return _finish(rows, {"rows": rows}, cfg.output_dir)


def _cmd_impulse(args):
    cfg = _config_from_args(args)
    series = run_impulse(cfg)
    return _finish(series, series_summary(series), cfg.output_dir)


def _cmd_uncertainty(args):
    cfg = _config_from_args(args)
    u_values = args.uncertainty if args.uncertainty else [0.0, 0.1, 0.2, 0.5]
    rows = run_uncertainty(cfg, u_values=u_values)
    return _finish(rows, {"rows": rows}, cfg.output_dir)


def _cmd_acf(args):
    cfg = _config_from_args(args)
    cfg = dataclasses.replace(cfg, record_effective_irs=True)
    m_max = args.m_max if args.m_max is not None else cfg.n_samples // 10
    series = measure_layer_acf(cfg, m_max)
    summary = series_summary(series)
    summary["acf_crossings"] = series.acf_crossings
    return _finish(series, summary, cfg.output_dir)


def _cmd_theory(args):
    cfg = _config_from_args(args)
    fp = cfg.filter
    consts = DerivedConstants(fp.n_taps, fp.lam)
    coherence = cfg.channel.coherence
    chain = coherence_chain(coherence, fp.l_max, consts)
    seq = [coherence] + chain[: fp.l_max - 1]
    recursion = []
    n = coherence
    for _ in range(fp.l_max):
        n = coherence_recursion(n, consts)
        recursion.append(n)
    single = rls_mse(fp, coherence)
    layered = mrls_mse_predict(fp, seq)
    summary = {
        "n_taps": fp.n_taps,
        "lam": fp.lam,
        "coherence": coherence,
        "noise_variance": fp.noise_variance,
        "rho": consts.rho,
        "psi": consts.psi,
        "g": consts.g,
        "rls_mse": single,
        "rls_mse_db": float(db(single)),
        "coherence_chain": chain,
        "coherence_recursion": recursion,
        "layer_coherences": [float(v) for v in seq],
        "mrls_mse_predicted": layered,
        "mrls_mse_predicted_db": float(db(layered)),
        "r_thresholds": fp.r_thresholds.tolist(),
    }
    print(json.dumps(summary, indent=2))
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "theory.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0


def _cmd_complexity(args):
    taps = args.taps if args.taps is not None else 50
    l_max = args.layers_max if args.layers_max is not None else 5
    l_opt = args.layers_opt if args.layers_opt is not None else 1
    summary = {
        "n_taps": taps,
        "l_max": l_max,
        "l_opt": l_opt,
        "n_itr": args.n_itr,
        "classic": complexity_counts(taps, l_max, l_opt, "classic"),
        "dcd": complexity_counts(taps, l_max, l_opt, "dcd", n_itr=args.n_itr),
    }
    print(json.dumps(summary, indent=2))
    return 0


_COMMANDS = {
    "track": _cmd_track,
    "sweep-snr": _cmd_sweep,
    "impulse": _cmd_impulse,
    "uncertainty": _cmd_uncertainty,
    "acf": _cmd_acf,
    "theory": _cmd_theory,
    "complexity": _cmd_complexity,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError, LookupError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalBreakdownError as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
