"""Command line front end: ``volcopula <ingest|copula|fit|scan|synth> --config FILE``.

All artifacts go below the configured output directory:

    series/<SYM>.csv          per-interval imbalance and noise tables
    trades/<SYM>.csv          synthetic trade files (``synth`` with kind = trades)
    copula/                   averaged copulas, asymmetry tables, differences
    fit/                      fitted N, model grids, error grids, fit trace
    scan/                     gamma sweeps, two-phase profiles, noise correlations
    manifests/<command>.json  config snapshot, digests, timings, warnings

Matrices are written with rows indexing q1 and columns q2, both ascending.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import empirical as emp
from . import io, kernels
from .config import PipelineConfig, load_config
from .errors import DegenerateSeries, MissingFile, ValidationError, VolCopulaError
from .histogram import CopulaHistogram
from .marketdata import aggregate_intervals, sign_stream
from .models import (KModelParams, binned_gaussian_copula, binned_k_copula, fit_N,
                     gamma_model_scan, model_error_grid)
from .synthetic import TradeStreamConfig, panel_series, sample_k_panel, sample_trade_stream

log = logging.getLogger("volcopula")

SCAN_TARGETS = ("gamma_vs_c", "gamma_vs_N", "two_phase", "pb_corr")
MODE_CHOICES = ("unconditional",) + emp.MODES


class Run:
    """Output writer that records digests, timings and warnings for the manifest."""

    def __init__(self, cfg: PipelineConfig, command: str, options: dict):
        self.cfg = cfg
        self.command = command
        self.options = options
        self.out = cfg.output_dir
        self.inputs: dict = {}
        self.outputs: dict = {}
        self.timings: dict = {}
        self.warnings: list = []
        self.details: dict = {}

    def _rel(self, path: Path) -> str:
        try:
            return str(Path(path).relative_to(self.out))
        except ValueError:
            return str(path)

    def write(self, rel: str, text: str) -> Path:
        path = self.out / rel
        self.outputs[rel] = io.atomic_write(path, text)
        return path

    def write_table(self, rel: str, header, rows):
        self.outputs[rel] = io.write_table(self.out / rel, header, rows)

    def write_json(self, rel: str, payload):
        self.write(rel, json.dumps(payload, indent=1, sort_keys=True) + "\n")

    def write_matrix(self, rel: str, h: CopulaHistogram):
        self.write(f"{rel}.txt", h.to_text())
        self.write(f"{rel}.json", h.to_json() + "\n")

    def note_input(self, path: Path):
        if not path.is_file():
            raise MissingFile(f"missing input: {path}")
        self.inputs[self._rel(path)] = io.file_digest(path)

    def warn(self, message: str):
        log.warning(message)
        self.warnings.append(message)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def finish(self):
        manifest = {
            "command": self.command,
            "options": self.options,
            "config": self.cfg.to_ini(),
            "kernel_backend": kernels.BACKEND,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings_seconds": self.timings,
            "warnings": self.warnings,
            "details": self.details,
        }
        io.atomic_write(self.out / "manifests" / f"{self.command}.json",
                        json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _read_series(run: Run):
    out = []
    for sym in run.cfg.symbols:
        path = run.out / "series" / f"{sym}.csv"
        run.note_input(path)
        out.append(io.read_series(path, sym))
    return out


# subcommands


def cmd_ingest(run: Run):
    cfg = run.cfg
    counts = {}
    for sym in cfg.symbols:
        path = cfg.data_dir / f"{sym}.csv"
        run.note_input(path)
        with run.stage(f"ingest:{sym}"):
            trades = io.read_trades(path)
            series = aggregate_intervals(sign_stream(trades), cfg.session,
                                         cfg.interval_seconds, sym)
        run.write(f"series/{sym}.csv", io.format_series(series))
        counts[sym] = {"trades": len(trades), "trades_aggregated": int(series.n_trades.sum()),
                       "intervals": len(series)}
    run.details["ingest"] = counts


def _asymmetry_outputs(run: Run, tag: str, summary: emp.AsymmetrySummary):
    run.write(f"copula/asymmetry_{tag}.csv", summary.table())
    rows = [(name, "" if val is None else val, len(summary.labels))
            for name, val in (("alpha", summary.skew_alpha), ("beta", summary.skew_beta))]
    run.write_table(f"copula/skewness_{tag}.csv", ("statistic", "skewness", "n_pairs"), rows)
    h = summary.histograms
    edges = h["alpha"]["edges"]
    run.write_table(f"copula/asymmetry_hist_{tag}.csv", ("lo", "hi", "alpha", "beta", "gamma"),
                    [(edges[i], edges[i + 1], h["alpha"]["density"][i],
                      h["beta"]["density"][i], h["gamma"]["density"][i])
                     for i in range(edges.size - 1)])
    for key, msg in summary.errors.items():
        run.warn(f"{tag} {key}: {msg}")


def cmd_copula(run: Run, mode: str = "unconditional", shuffle: bool = False):
    cfg = run.cfg
    series = _read_series(run)
    with run.stage("pairs"):
        ps = emp.build_pairs(series, cfg.bins, cfg.estimator)
    if ps.diagnostics["unmatched_dropped"]:
        run.warn(f"{ps.diagnostics['unmatched_dropped']} unmatched intervals dropped")
    if ps.diagnostics["ties"]:
        run.warn(f"{ps.diagnostics['ties']} tied imbalance values")
    labels = ps.labels()
    with run.stage("unconditional"):
        hists = emp.pair_histograms(ps)
        avg = emp.average_copula(hists)
    c_bar = float(np.mean(ps.correlations))
    avg.meta.update(c_bar=c_bar, order="preset")
    run.write_matrix("copula/unconditional", avg)
    run.write_matrix("copula/unconditional_symmetrized", emp.symmetrized_average_copula(hists))
    run.write_table("copula/correlations.csv", ("k", "l", "correlation"),
                    [(a, b, r) for (a, b), r in zip(labels, ps.correlations)])
    if len(hists) >= 2:
        _asymmetry_outputs(run, "unconditional", emp.asymmetry_distributions(hists, labels))
    run.write_json("copula/summary.json", {
        "c_bar": c_bar, "estimator": cfg.estimator, "n_pairs": len(hists),
        "n_stocks": len(series), "symbols": list(cfg.symbols), "bins": cfg.bins,
    })
    if mode != "unconditional":
        with run.stage(f"conditional:{mode}"):
            thresholds = [emp.conditioning_thresholds(s, cfg.exclusion_m) for s in series]
            cond = emp.pair_histograms(ps, mode, thresholds)
            cavg = emp.average_copula(cond)
        run.write_matrix(f"copula/conditional_{mode}", cavg)
        delta = emp.copula_difference(avg, cavg)
        run.write(f"copula/delta_{emp.DELTA_LABEL[mode]}.txt", CopulaHistogram(delta).to_text())
        run.write_table("copula/thresholds.csv",
                        ("symbol", "m", "sigma_max_cut", "sigma_min_cut"),
                        [(t.symbol, t.m, t.sigma_max_cut, t.sigma_min_cut) for t in thresholds])
        if len(cond) >= 2:
            _asymmetry_outputs(run, f"conditional_{mode}", emp.asymmetry_distributions(cond, labels))
        run.details["conditioning"] = {"mode": mode, "exclusion_m": cfg.exclusion_m,
                                       "delta_label": emp.DELTA_LABEL[mode]}
    if shuffle:
        with run.stage("shuffle"):
            rep = emp.shuffle_robustness(hists, cfg.seed, list(cfg.symbols))
        rep.shuffled.meta.update(c_bar=c_bar)
        run.write_matrix("copula/unconditional_shuffled", rep.shuffled)
        if rep.shuffled_summary is not None:
            _asymmetry_outputs(run, "unconditional_shuffled", rep.shuffled_summary)
        payload = {"seed": cfg.seed, "permutation": rep.permutation,
                   "flipped_pairs": int(rep.flipped.sum()),
                   "max_bin_deviation": rep.max_bin_deviation, "skew_deltas": rep.skew_deltas}
        run.write_json("copula/shuffle.json", payload)
        run.details["shuffle"] = payload


def cmd_fit(run: Run):
    cfg = run.cfg
    src = run.out / "copula" / "unconditional.json"
    run.note_input(src)
    emp_h = CopulaHistogram.from_json(src.read_text())
    if emp_h.bins != cfg.bins:
        raise ValidationError(f"copula has {emp_h.bins} bins, config says {cfg.bins}")
    c_bar = float(emp_h.meta["c_bar"])
    with run.stage("fit"):
        res = fit_N(emp_h, c_bar, cfg.fit_bracket, cfg.quadrature)
    if res.warning:
        run.warnings.append(f"fit: {res.warning}")
    with run.stage("models"):
        k_model = binned_k_copula(KModelParams(c_bar, res.n_hat), cfg.bins, cfg.quadrature)
        g_model = binned_gaussian_copula(c_bar, cfg.bins)
    k_err = model_error_grid(emp_h, k_model)
    g_err = model_error_grid(emp_h, g_model)
    run.write_matrix("fit/k_model", k_model)
    run.write_matrix("fit/gaussian_model", g_model)
    run.write("fit/error_k.txt", CopulaHistogram(k_err).to_text())
    run.write("fit/error_gaussian.txt", CopulaHistogram(g_err).to_text())
    run.write("fit/fit_trace.csv", res.trace_table())
    payload = {"n_hat": res.n_hat, "c_bar": c_bar, "objective": res.objective,
               "gaussian_objective": float(np.sum(g_err ** 2)), "bracket": list(cfg.fit_bracket),
               "warning": res.warning, "evaluations": len(res.trace)}
    run.write_json("fit/fit.json", payload)
    run.details["fit"] = payload


def cmd_scan(run: Run, target: str):
    cfg = run.cfg
    sc = cfg.scan
    if target == "gamma_vs_c":
        with run.stage(target):
            rows = gamma_model_scan("N", sc.fixed_N, sc.c_values, cfg.bins, cfg.quadrature)
        run.write_table("scan/gamma_vs_c.csv", ("c", "gamma"), rows)
    elif target == "gamma_vs_N":
        with run.stage(target):
            rows = gamma_model_scan("c", sc.fixed_c, sc.n_values, cfg.bins, cfg.quadrature)
        run.write_table("scan/gamma_vs_N.csv", ("N", "gamma"), rows)
    elif target == "two_phase":
        flags, hist_rows = [], []
        for s in _read_series(run):
            with run.stage(f"two_phase:{s.symbol}"):
                profile = emp.bimodality_profile(s)
            for b in profile:
                flags.append((s.symbol, b.lo, b.hi, b.count, b.status, int(b.bimodal)))
                hist_rows += [(s.symbol, b.lo, b.hi, b.edges[i], b.edges[i + 1], b.density[i])
                              for i in range(b.density.size)]
        run.write_table("scan/two_phase_flags.csv",
                        ("symbol", "band_lo", "band_hi", "count", "status", "bimodal"), flags)
        run.write_table("scan/two_phase_hist.csv",
                        ("symbol", "band_lo", "band_hi", "bin_lo", "bin_hi", "density"), hist_rows)
    elif target == "pb_corr":
        rows = []
        for s in _read_series(run):
            try:
                rows.append((s.symbol, emp.pb_noise_correlation(s)))
            except DegenerateSeries as exc:
                run.warn(f"pb_corr {s.symbol}: {exc}")
                rows.append((s.symbol, "nan"))
        run.write_table("scan/pb_corr.csv", ("symbol", "correlation"), rows)
    else:
        raise ValidationError(f"unknown scan target {target!r}")


def cmd_synth(run: Run):
    cfg = run.cfg
    sy = cfg.synth
    if sy.kind == "k_panel":
        with run.stage("sample"):
            x, z = sample_k_panel(len(cfg.symbols), sy.length, sy.c, sy.N, cfg.seed)
            series = panel_series(x, np.sqrt(2 * z / sy.N), list(cfg.symbols), cfg.session,
                                  cfg.interval_seconds)
        for s in series:
            run.write(f"series/{s.symbol}.csv", io.format_series(s))
        run.details["synth"] = {"kind": "k_panel", "c": sy.c, "N": sy.N, "length": sy.length}
    elif sy.kind == "trades":
        tcfg = TradeStreamConfig(sy.volume_law, sy.tail_exponent, sy.sign_persistence,
                                 sy.trades_per_minute, sy.minutes, cfg.seed,
                                 session=cfg.session)
        for k, sym in enumerate(cfg.symbols):
            with run.stage(f"sample:{sym}"):
                st = sample_trade_stream(tcfg, stream=k)
            run.write(f"trades/{sym}.csv", io.format_trades(st.trades))
        run.details["synth"] = {"kind": "trades", "volume_law": sy.volume_law,
                                "tail_exponent": sy.tail_exponent, "minutes": sy.minutes,
                                "trades_per_minute": sy.trades_per_minute}
    else:
        raise ValidationError(f"unknown synth kind {sy.kind!r}")


# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ValidationError.exit_code, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="pipeline INI file")
    common.add_argument("--seed", type=_seed, help="override [pipeline] seed")
    common.add_argument("--out", type=Path, help="override [pipeline] output_dir")
    common.add_argument("--exclusion-m", type=int, help="override [pipeline] exclusion_m")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="volcopula", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("ingest", parents=[common], help="trade files to per-interval series")
    p = sub.add_parser("copula", parents=[common], help="averaged empirical copulas")
    p.add_argument("--mode", choices=MODE_CHOICES, default="unconditional")
    p.add_argument("--shuffle", action="store_true", help="also average in shuffled stock order")
    sub.add_parser("fit", parents=[common], help="fit N of the K copula")
    p = sub.add_parser("scan", parents=[common], help="model sweeps and noise diagnostics")
    p.add_argument("target", choices=SCAN_TARGETS)
    sub.add_parser("synth", parents=[common], help="write synthetic series or trade files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output_dir"] = args.out.resolve()
        if args.exclusion_m is not None:
            overrides["exclusion_m"] = args.exclusion_m
        if overrides:
            cfg = cfg.replace(**overrides)
        options = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
                   if k not in ("config", "verbose")}
        run = Run(cfg, args.command if args.command != "scan" else f"scan_{args.target}", options)
        if args.command == "ingest":
            cmd_ingest(run)
        elif args.command == "copula":
            cmd_copula(run, args.mode, args.shuffle)
        elif args.command == "fit":
            cmd_fit(run)
        elif args.command == "scan":
            cmd_scan(run, args.target)
        elif args.command == "synth":
            cmd_synth(run)
        run.finish()
    except VolCopulaError as exc:
        print(f"volcopula: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
