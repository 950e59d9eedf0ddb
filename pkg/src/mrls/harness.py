"""Monte Carlo experiment runner.

Each round draws an independent channel/input/noise realization from
seed = base_seed + round_index, runs the layered estimator on it, and
records squared weight-error trajectories for both the plain and the
layered estimator plus the selected depth. Layer 1 of the stack performs
exactly the classic RLS update (same gain, same recursion), so its
weight row doubles as the plain-RLS baseline; both estimators see the
identical realization by construction.

Aggregation is a sum over rounds in round order, so results do not
depend on the worker count used to compute them.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from .channel import ChannelSpec, ChannelState, desired_signal, regressor_matrix
from .estimators import FilterParams, MRls
from .numerics import NumericalBreakdownError, bpsk_stream, cgauss_stream, make_rng
from .theory import coherence_from_acf

__all__ = [
    "RunConfig",
    "MetricsSeries",
    "standard_config",
    "run_tracking",
    "sweep_snr",
    "run_impulse",
    "run_uncertainty",
    "measure_layer_acf",
    "emit_outputs",
    "series_summary",
    "config_to_dict",
    "config_from_dict",
    "snr_db_to_noise_variance",
    "db",
]

# fraction of the run treated as steady state: the final sixth
STEADY_DIVISOR = 6


def db(x):
    """Power ratio in dB, floored to keep log10 finite."""
    return 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), 1e-300))


def snr_db_to_noise_variance(snr_db):
    # total tap power is 1, so SNR fixes the noise power directly
    return 10.0 ** (-snr_db / 10.0)


@dataclass
class RunConfig:
    """Everything one experiment needs.

    channel.noise_variance and filter.noise_variance are kept equal by
    the constructors here; they diverge only in noise-uncertainty runs,
    where the estimator is handed a perturbed value.
    """

    channel: ChannelSpec
    filter: FilterParams
    n_samples: int = 3000
    rounds: int = 200
    base_seed: int = 0
    snr_db_list: list | None = None
    noise_uncertainty: float = 0.0
    record_effective_irs: bool = False
    output_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.noise_uncertainty < 0:
            raise ValueError(f"noise_uncertainty must be >= 0, got {self.noise_uncertainty}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    @property
    def steady_slice(self):
        return slice(self.n_samples - self.n_samples // STEADY_DIVISOR, self.n_samples)


def standard_config(
    n_taps=50,
    lam=None,
    coherence=200.0,
    snr_db=20.0,
    n_samples=3000,
    rounds=200,
    base_seed=0,
    l_max=5,
    z=2.0**-5,
    delta=0.01,
    input_kind="bpsk",
    pdp=None,
    impulse_time=None,
    impulse_gain=-1.0,
    snr_db_list=None,
    noise_uncertainty=0.0,
    record_effective_irs=False,
    output_dir=None,
    workers=1,
):
    """RunConfig with the reference experiment defaults."""
    if lam is None:
        lam = 1.0 - 1.0 / (2.0 * n_taps)
    noise_variance = snr_db_to_noise_variance(snr_db)
    channel = ChannelSpec(
        n_taps=n_taps,
        coherence=coherence,
        noise_variance=noise_variance,
        pdp=pdp,
        input_kind=input_kind,
        impulse_time=impulse_time,
        impulse_gain=impulse_gain,
    )
    filt = FilterParams(
        n_taps=n_taps, lam=lam, delta=delta, z=z, l_max=l_max, noise_variance=noise_variance
    )
    return RunConfig(
        channel=channel,
        filter=filt,
        n_samples=n_samples,
        rounds=rounds,
        base_seed=base_seed,
        snr_db_list=snr_db_list,
        noise_uncertainty=noise_uncertainty,
        record_effective_irs=record_effective_irs,
        output_dir=output_dir,
        workers=workers,
    )


@dataclass
class MetricsSeries:
    """Round-averaged outputs of one experiment."""

    config: RunConfig
    mse_rls: np.ndarray
    mse_mrls: np.ndarray
    lopt_bar: np.ndarray
    layer_residual_power: np.ndarray
    layer_ir_power: np.ndarray
    rounds_used: int
    rounds_excluded: int
    acf_curves: np.ndarray | None = None
    acf_crossings: list | None = None
    event_stats: dict | None = None

    def _steady(self, series):
        return float(np.mean(series[self.config.steady_slice]))

    @property
    def steady_mse_rls(self):
        return self._steady(self.mse_rls)

    @property
    def steady_mse_mrls(self):
        return self._steady(self.mse_mrls)

    @property
    def steady_lopt(self):
        return self._steady(self.lopt_bar)

    @property
    def steady_mse_rls_db(self):
        return float(db(self.steady_mse_rls))

    @property
    def steady_mse_mrls_db(self):
        return float(db(self.steady_mse_mrls))


def _simulate_round(config, acf_m_max, seed):
    """One full realization. Returns per-sample arrays and steady-state
    accumulators, or None if the round broke down numerically."""
    try:
        rng = make_rng(seed)
        ch = config.channel
        n = config.n_samples
        state = ChannelState(ch, rng)
        h = state.trajectory(n)
        if ch.input_kind == "bpsk":
            stream = bpsk_stream(rng, n)
        else:
            stream = cgauss_stream(rng, n, 1.0)
        x = regressor_matrix(stream, ch.n_taps)
        w = cgauss_stream(rng, n, ch.noise_variance)
        d = desired_signal(h, x, w)

        params = config.filter
        if config.noise_uncertainty > 0.0:
            # estimator-side noise power only; the realization is untouched,
            # so runs at different u stay paired
            scale = max(0.0, 1.0 + config.noise_uncertainty * rng.standard_normal())
            params = dataclasses.replace(params, noise_variance=params.noise_variance * scale)

        est = MRls(params)
        l_max = params.l_max
        steady = config.steady_slice
        steady_start = steady.start
        steady_len = n - steady_start

        se_rls = np.empty(n)
        se_mrls = np.empty(n)
        lopt = np.empty(n)
        resid_power = np.zeros(l_max)
        ir_power = np.zeros(l_max)
        eff_irs = None
        if acf_m_max is not None:
            eff_irs = np.empty((n, l_max + 1, ch.n_taps), dtype=np.complex128)

        for i in range(n):
            h_tilde, l_opt, residuals = est.step(x[i], d[i])
            diff_rls = h[i] - est.h_layers[0]
            se_rls[i] = np.sum(np.abs(diff_rls) ** 2)
            se_mrls[i] = np.sum(np.abs(h[i] - h_tilde) ** 2)
            lopt[i] = l_opt
            if i >= steady_start:
                resid_power += np.abs(residuals) ** 2
                cum = np.cumsum(est.h_layers, axis=0)
                ir_power += np.sum(np.abs(h[i][None, :] - cum) ** 2, axis=1)
            if eff_irs is not None:
                eff_irs[i, 0] = h[i]
                eff_irs[i, 1:] = h[i][None, :] - np.cumsum(est.h_layers, axis=0)

        out = {
            "se_rls": se_rls,
            "se_mrls": se_mrls,
            "lopt": lopt,
            "resid_power": resid_power / steady_len,
            "ir_power": ir_power / steady_len,
        }
        if eff_irs is not None:
            out["acf_sums"] = _acf_sums(eff_irs[steady_start:], acf_m_max)
        return out
    except NumericalBreakdownError:
        return None


def _acf_sums(eff_irs, m_max):
    """Unnormalized autocorrelation sums per layer, summed over taps,
    lags 0..m_max. eff_irs has shape (samples, layers, taps)."""
    s = eff_irs.shape[0]
    f = np.fft.fft(eff_irs, n=2 * s, axis=0)
    ac = np.fft.ifft(f * np.conj(f), axis=0)[: m_max + 1]
    return ac.real.sum(axis=2)


def _map_rounds(config, acf_m_max):
    seeds = [config.base_seed + r for r in range(config.rounds)]
    fn = partial(_simulate_round, config, acf_m_max)
    if config.workers == 1:
        for seed in seeds:
            yield fn(seed)
        return
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        yield from pool.map(fn, seeds, chunksize=max(1, len(seeds) // (4 * config.workers)))


def run_tracking(config, _acf_m_max=None):
    """Round-averaged tracking experiment at fixed SNR."""
    n = config.n_samples
    l_max = config.filter.l_max
    sum_rls = np.zeros(n)
    sum_mrls = np.zeros(n)
    sum_lopt = np.zeros(n)
    sum_resid = np.zeros(l_max)
    sum_ir = np.zeros(l_max)
    sum_acf = None
    used = 0
    excluded = 0
    for result in _map_rounds(config, _acf_m_max):
        if result is None:
            excluded += 1
            continue
        used += 1
        sum_rls += result["se_rls"]
        sum_mrls += result["se_mrls"]
        sum_lopt += result["lopt"]
        sum_resid += result["resid_power"]
        sum_ir += result["ir_power"]
        if _acf_m_max is not None:
            acf = result["acf_sums"]
            sum_acf = acf if sum_acf is None else sum_acf + acf
    if used == 0:
        raise NumericalBreakdownError(f"all {config.rounds} rounds broke down")

    series = MetricsSeries(
        config=config,
        mse_rls=sum_rls / used,
        mse_mrls=sum_mrls / used,
        lopt_bar=sum_lopt / used,
        layer_residual_power=sum_resid / used,
        layer_ir_power=sum_ir / used,
        rounds_used=used,
        rounds_excluded=excluded,
    )
    if sum_acf is not None:
        series.acf_curves = sum_acf / sum_acf[0]
        crossings = []
        for layer in range(series.acf_curves.shape[1]):
            try:
                crossings.append(coherence_from_acf(series.acf_curves[:, layer]))
            except LookupError:
                crossings.append(None)
        series.acf_crossings = crossings
    return series


def measure_layer_acf(config, m_max):
    """Normalized autocorrelation of each layer's effective impulse
    response, averaged over taps and rounds, with 0.5-crossings.

    Curve 0 is the channel itself; curve l is what layer l+1 tracks.
    Estimated over the post-transient segment, so n_samples must cover
    at least 10 * m_max lags.
    """
    if not config.record_effective_irs:
        raise ValueError("config.record_effective_irs must be enabled")
    if config.n_samples < 10 * m_max:
        raise ValueError(f"need n_samples >= 10*m_max = {10 * m_max}, got {config.n_samples}")
    series = run_tracking(config, _acf_m_max=m_max)
    return series


def sweep_snr(config):
    """run_tracking once per SNR point; steady-state aggregates per point."""
    if not config.snr_db_list:
        raise ValueError("snr_db_list must be nonempty for an SNR sweep")
    rows = []
    for snr in config.snr_db_list:
        sigma2 = snr_db_to_noise_variance(snr)
        point = dataclasses.replace(
            config,
            channel=dataclasses.replace(config.channel, noise_variance=sigma2),
            filter=dataclasses.replace(config.filter, noise_variance=sigma2),
        )
        series = run_tracking(point)
        rows.append(
            {
                "snr_db": float(snr),
                "mse_rls_db": series.steady_mse_rls_db,
                "mse_mrls_db": series.steady_mse_mrls_db,
                "mse_rls": series.steady_mse_rls,
                "mse_mrls": series.steady_mse_mrls,
                "lopt_bar": series.steady_lopt,
                "rounds_excluded": series.rounds_excluded,
            }
        )
    return rows


def run_impulse(config):
    """Tracking run around an abrupt channel change, with event metrics.

    Reports the peak depth within 100 samples of the event, the
    post-transient depth, and the reconvergence time of each estimator
    (samples until the round-averaged MSE returns within 1 dB of its
    pre-event level).
    """
    if config.channel.impulse_time is None:
        raise ValueError("channel.impulse_time must be set for an impulse run")
    series = run_tracking(config)
    t0 = config.channel.impulse_time
    n = config.n_samples
    window = slice(max(0, t0 - 100), min(n, t0 + 101))
    peak_idx = int(np.argmax(series.lopt_bar[window])) + window.start

    pre = slice(max(0, t0 - 500), t0)
    pre_rls_db = float(db(np.mean(series.mse_rls[pre])))
    pre_mrls_db = float(db(np.mean(series.mse_mrls[pre])))

    def reconv_time(series_linear, pre_level_db):
        post = db(series_linear[t0:])
        ok = np.nonzero(post <= pre_level_db + 1.0)[0]
        return int(ok[0]) if ok.size else None

    series.event_stats = {
        "peak_lopt": float(series.lopt_bar[window].max()),
        "peak_time": peak_idx,
        "post_lopt": series.steady_lopt,
        "pre_mse_rls_db": pre_rls_db,
        "pre_mse_mrls_db": pre_mrls_db,
        "reconv_rls": reconv_time(series.mse_rls, pre_rls_db),
        "reconv_mrls": reconv_time(series.mse_mrls, pre_mrls_db),
    }
    return series


def run_uncertainty(config, u_values=None):
    """Sweep of estimator-side noise-power uncertainty.

    For each u, each round hands the estimator a noise power scaled by
    max(0, 1 + u * randn) while the realization itself is unchanged.
    Returns one row per (u, snr) pair.
    """
    if u_values is None:
        u_values = [config.noise_uncertainty]
    snrs = config.snr_db_list
    if not snrs:
        raise ValueError("snr_db_list must be nonempty for an uncertainty sweep")
    rows = []
    for u in u_values:
        if u < 0:
            raise ValueError(f"uncertainty must be >= 0, got {u}")
        point = dataclasses.replace(config, noise_uncertainty=float(u))
        for row in sweep_snr(point):
            rows.append({"u": float(u), **row})
    return rows


def config_to_dict(config):
    d = dataclasses.asdict(config)
    d["channel"]["pdp"] = [float(p) for p in d["channel"]["pdp"]]
    if d["output_dir"] is not None:
        d["output_dir"] = str(d["output_dir"])
    return d


def config_from_dict(d):
    d = dict(d)
    channel = ChannelSpec(**d.pop("channel"))
    filt = FilterParams(**d.pop("filter"))
    return RunConfig(channel=channel, filter=filt, **d)


def series_summary(series):
    """JSON-ready aggregate view of a MetricsSeries, config included."""
    summary = {
        "config": config_to_dict(series.config),
        "rounds_used": series.rounds_used,
        "rounds_excluded": series.rounds_excluded,
        "steady_mse_rls": series.steady_mse_rls,
        "steady_mse_mrls": series.steady_mse_mrls,
        "steady_mse_rls_db": series.steady_mse_rls_db,
        "steady_mse_mrls_db": series.steady_mse_mrls_db,
        "steady_lopt": series.steady_lopt,
        "layer_residual_power": series.layer_residual_power.tolist(),
        "layer_ir_power": series.layer_ir_power.tolist(),
    }
    if series.event_stats is not None:
        summary["event_stats"] = series.event_stats
    if series.acf_crossings is not None:
        summary["acf_crossings"] = series.acf_crossings
    return summary


def _write_csv(path, header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _plot_lines(path, x, curves, xlabel, ylabel):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, y in curves:
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_outputs(result, out_dir):
    """Write CSV data, a JSON summary, and SVG plots for a run result.

    Accepts a MetricsSeries (tracking/impulse/acf runs) or a list of
    sweep rows. Returns the list of written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if isinstance(result, MetricsSeries):
            return _emit_series(result, out)
        if isinstance(result, list) and result and "snr_db" in result[0]:
            return _emit_rows(result, out)
        raise ValueError(f"cannot emit outputs for {type(result).__name__}")
    except OSError as exc:
        raise OSError(f"writing outputs under {out}: {exc}") from exc


def _emit_series(series, out):
    paths = []
    n = np.arange(series.config.n_samples)
    mse_rls_db = db(series.mse_rls)
    mse_mrls_db = db(series.mse_mrls)

    csv_path = out / "tracking.csv"
    _write_csv(
        csv_path,
        "n,mse_rls_db,mse_mrls_db,lopt_bar",
        zip(
            n.tolist(),
            mse_rls_db.tolist(),
            mse_mrls_db.tolist(),
            series.lopt_bar.tolist(),
        ),
    )
    paths.append(csv_path)

    summary = series_summary(series)
    json_path = out / "summary.json"
    json_path.write_text(json.dumps(summary, indent=2) + "\n")
    paths.append(json_path)

    mse_svg = out / "mse_vs_n.svg"
    _plot_lines(
        mse_svg,
        n,
        [("RLS", mse_rls_db), ("m-RLS", mse_mrls_db)],
        "sample n",
        "MSE (dB)",
    )
    paths.append(mse_svg)

    lopt_svg = out / "lopt_vs_n.svg"
    _plot_lines(lopt_svg, n, [("selected depth", series.lopt_bar)], "sample n", "average depth")
    paths.append(lopt_svg)

    if series.acf_curves is not None:
        acf_csv = out / "acf.csv"
        layers = series.acf_curves.shape[1]
        header = "lag," + ",".join(f"acf_layer{l + 1}" for l in range(layers))
        _write_csv(
            acf_csv,
            header,
            (
                [int(m)] + [float(v) for v in series.acf_curves[m]]
                for m in range(series.acf_curves.shape[0])
            ),
        )
        paths.append(acf_csv)
        acf_svg = out / "acf.svg"
        lags = np.arange(series.acf_curves.shape[0])
        _plot_lines(
            acf_svg,
            lags,
            [(f"layer {l + 1}", series.acf_curves[:, l]) for l in range(layers)],
            "lag",
            "normalized ACF",
        )
        paths.append(acf_svg)
    return paths


def _emit_rows(rows, out):
    paths = []
    has_u = "u" in rows[0]
    name = "uncertainty" if has_u else "sweep"
    cols = (["u"] if has_u else []) + ["snr_db", "mse_rls_db", "mse_mrls_db", "lopt_bar"]
    csv_path = out / f"{name}.csv"
    _write_csv(csv_path, ",".join(cols), ([float(r[c]) for c in cols] for r in rows))
    paths.append(csv_path)

    json_path = out / "summary.json"
    json_path.write_text(json.dumps({"rows": rows}, indent=2) + "\n")
    paths.append(json_path)

    if not has_u:
        snr = [r["snr_db"] for r in rows]
        svg = out / "mse_vs_snr.svg"
        _plot_lines(
            svg,
            snr,
            [
                ("RLS", [r["mse_rls_db"] for r in rows]),
                ("m-RLS", [r["mse_mrls_db"] for r in rows]),
            ],
            "SNR (dB)",
            "steady MSE (dB)",
        )
        paths.append(svg)
        svg2 = out / "lopt_vs_snr.svg"
        _plot_lines(
            svg2,
            snr,
            [("selected depth", [r["lopt_bar"] for r in rows])],
            "SNR (dB)",
            "average depth",
        )
        paths.append(svg2)
    return paths
