"""Command-line entry point: ``chiraloc <subcommand> [options]``.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure.
Errors are also printed to stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from chiraloc import __version__
from chiraloc import config as cfgmod
from chiraloc import experiments, io, oracles
from chiraloc.config import ConfigError
from chiraloc.ensemble import default_workers, reference_run, run_ensemble
from chiraloc.observables import (
    classify_transport,
    localization_fit,
    profile_at,
    reference_time,
    rpr_series,
    transport_record,
)

log = logging.getLogger("chiraloc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

# flag -> config key
PARAM_FLAGS = {
    "--n-sites": "n_sites",
    "--directionality": "directionality",
    "--xi": "xi",
    "--w-bar": "w_bar",
    "--horizon": "horizon",
    "--realizations": "realizations",
    "--disorder-mode": "disorder_mode",
    "--gamma-nr": "gamma_nr",
    "--seed": "seed",
    "--workers": "workers",
}

SUBCOMMANDS = {
    "simulate": "disorder-averaged populations, spatial cut, rPR and entropies",
    "scan-boundary": "delocalized/localized labels over the (D, w) grid",
    "scan-reentrance": "entropy decay exponent ratio over xi",
    "scan-zeta": "localization length at the reference time over D and xi",
    "spectral-stats": "gap ratio and intrasample variance at D = 0",
    "oracle-check": "closed-form and brute-force consistency checks",
}


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:g}"


def _xi_tag(xi: float) -> str:
    return f"{xi / math.pi:g}pi"


def _run_kw(cfg: dict) -> dict:
    return {"stride": cfg["stride"], "step": cfg["step"], "workers": cfg["workers"] or default_workers()}


def _maybe_plot(cfg, writer, name, make):
    if not cfg["plot"]:
        return
    from chiraloc import plotting

    fig = make(plotting)
    writer.figure(fig, name)
    plotting.close(fig)


# ----------------------------------------------------------------- simulate
def cmd_simulate(cfg: dict, writer: io.ArtifactWriter) -> int:
    params = cfgmod.to_params(cfg)
    kw = _run_kw(cfg)
    horizon = cfg["horizon"]
    t_cut = cfg["t_cut"] or horizon
    seed = cfg["seed"]
    n = params.n_sites
    ref = reference_run(params, horizon, stride=kw["stride"], step=kw["step"])
    w_values = cfg["map_w_list"] if cfg.get("_map") else (params.disorder_strength,)
    ref_cut = profile_at(ref.times, ref.avg_populations, t_cut)
    ref_rec = transport_record(ref.avg_populations, params.initial_site)
    try:
        t_ref = reference_time(ref.times, ref.avg_total, cfg["reference_level"])
    except ValueError:
        t_ref = None
    writer.table(f"reference_N{n}_D{_fmt(params.directionality)}_xi{_xi_tag(params.xi)}_populations",
                 io.heatmap_columns(n), io.heatmap_rows(ref.times, ref.avg_populations))
    panels, cuts, summary_panels = [], [], []
    for w in w_values:
        p = params.replace(disorder_strength=float(w))
        ens = ref if w == 0 else run_ensemble(p, cfg["realizations"], horizon, seed, **kw)
        tag = f"sim_N{n}_D{_fmt(p.directionality)}_xi{_xi_tag(p.xi)}_w{_fmt(w)}_seed{seed}"
        writer.table(f"{tag}_populations", io.heatmap_columns(n), io.heatmap_rows(ens.times, ens.avg_populations))
        cut = profile_at(ens.times, ens.avg_populations, t_cut)
        writer.table(f"{tag}_cut", ["site", "P_avg", "P_reference"],
                     ([k + 1, cut[k], ref_cut[k]] for k in range(n)))
        phase, rec, _ = classify_transport(ens.avg_populations, ref.avg_populations,
                                           params.initial_site, cfg["edge_margin"])
        rpr = rpr_series(ens.avg_populations, ref.avg_populations)
        writer.table(
            f"{tag}_timeseries",
            ["gamma_t", "P_t", "P_t_reference", "S_A", "S_B", "S_A_reference", "S_B_reference",
             "rPR", "argmax_site", "argmax_site_reference"],
            zip(ens.times, ens.avg_total, ref.avg_total, ens.avg_entropy_a, ens.avg_entropy_b,
                ref.avg_entropy_a, ref.avg_entropy_b, rpr, rec.argmax_sites, ref_rec.argmax_sites),
        )
        fit = localization_fit(cut, params.initial_site)
        fit_ref = localization_fit(profile_at(ens.times, ens.avg_populations, t_ref), params.initial_site) \
            if t_ref is not None else None
        summary_panels.append({
            "w_bar": w,
            "phase": phase.value,
            "max_excursion": rec.max_excursion,
            "reference_reach": ref_rec.max_excursion,
            "fit_at_cut": _fit_dict(fit),
            "fit_at_reference_time": _fit_dict(fit_ref) if fit_ref else None,
            "realizations": ens.realization_count,
            "seeds": list(ens.seeds),
        })
        panels.append((rf"$\bar w={w:g}$", ens.avg_populations))
        cuts.append((rf"$\bar w={w:g}$", cut))
    writer.json(f"sim_N{n}_D{_fmt(params.directionality)}_xi{_xi_tag(params.xi)}_seed{seed}_summary", {
        "params": params.to_dict(),
        "t_cut": t_cut,
        "reference_time": t_ref,
        "reference_level": cfg["reference_level"],
        "base_seed": seed,
        "seed_rule": "SeedSequence([base_seed, index]) -> first uint64 word",
        "panels": summary_panels,
    })
    _maybe_plot(cfg, writer, f"sim_seed{seed}_heatmaps",
                lambda plt: plt.population_heatmaps(ref.times, [(r"$\bar w=0$", ref.avg_populations)] + panels, n))
    _maybe_plot(cfg, writer, f"sim_seed{seed}_cut", lambda plt: plt.profile_cut(cuts, ref_cut, t_cut))
    labels = ", ".join("w={:g} {}".format(p["w_bar"], p["phase"]) for p in summary_panels)
    print(f"simulate: {labels}")
    return EXIT_OK


def _fit_dict(fit):
    return {"n_L": fit.n_L, "zeta_L": fit.zeta_L, "r_squared": fit.r_squared, "amplitude": fit.amplitude,
            "fit_window": list(fit.fit_window), "ok": fit.ok, "reason": fit.reason}


# ------------------------------------------------------------ scan-boundary
def cmd_scan_boundary(cfg: dict, writer: io.ArtifactWriter) -> int:
    params = cfgmod.to_params(cfg)
    scan = experiments.scan_phase_boundary(
        params.xi, cfg["d_grid"], cfg["w_grid"], params.n_sites, cfg["horizon"], cfg["realizations"],
        cfg["seed"], edge_margin=cfg["edge_margin"], base=params,
        progress=lambda c: log.info("D=%g w=%g -> %s", c.directionality, c.w_bar, c.label.value),
        **_run_kw(cfg),
    )
    tag = f"boundary_N{params.n_sites}_xi{_xi_tag(params.xi)}_seed{cfg['seed']}"
    writer.table(f"{tag}_cells", ["directionality", "w_bar", "label", "cell_seed", "max_excursion", "reference_reach"],
                 ([c.directionality, c.w_bar, c.label.value, c.seed, c.max_excursion, c.reference_reach]
                  for c in scan.cells))
    writer.table(f"{tag}_transitions", ["directionality", "w_low", "w_high", "into"],
                 ([t.directionality, t.w_low, t.w_high, t.into.value] for t in scan.transitions))
    writer.json(f"{tag}_summary", {
        "xi": scan.xi, "params": params.to_dict(), "d_grid": scan.d_grid, "w_grid": scan.w_grid,
        "horizon": scan.horizon, "realizations": scan.realizations, "base_seed": scan.seed,
        "smallest_localized_w": {str(d): w for d, w in scan.boundary().items()},
    })
    _maybe_plot(cfg, writer, tag, lambda plt: plt.phase_diagram(scan))
    print(f"scan-boundary: {len(scan.cells)} cells, {len(scan.transitions)} transitions")
    return EXIT_OK


# ---------------------------------------------------------- scan-reentrance
def cmd_scan_reentrance(cfg: dict, writer: io.ArtifactWriter) -> int:
    params = cfgmod.to_params(cfg)
    kw = _run_kw(cfg)
    kw.pop("stride")
    curve = experiments.scan_reentrance(
        params.directionality, params.disorder_strength, cfg["xi_grid"], params.n_sites,
        cfg["reentrance_horizon"], cfg["realizations"], cfg["seed"], stride=cfg["reentrance_stride"],
        level=0.1, min_fraction=cfg["tail_fraction"], base=params, **kw,
    )
    tag = (f"reentrance_N{params.n_sites}_D{_fmt(params.directionality)}_w{_fmt(params.disorder_strength)}"
           f"_seed{cfg['seed']}")
    writer.table(
        tag,
        ["xi", "xi_over_pi", "ratio_A", "beta_A", "beta0_A", "ratio_B", "beta_B", "beta0_B",
         "t_start", "start_rule", "ok"],
        ([p.xi, p.xi / math.pi, p.ratio_a.ratio, p.ratio_a.beta, p.ratio_a.beta_0, p.ratio_b.ratio,
          p.ratio_b.beta, p.ratio_b.beta_0, p.ratio_a.t_start, p.ratio_a.start_rule, p.ratio_a.ok]
         for p in curve.points),
    )
    writer.json(f"{tag}_summary", {
        "params": params.to_dict(), "threshold": curve.threshold, "sign_pattern": curve.sign_pattern(),
        "horizon": curve.horizon, "stride": curve.stride, "realizations": curve.realizations,
        "base_seed": curve.seed,
    })
    _maybe_plot(cfg, writer, tag, lambda plt: plt.reentrance(curve))
    print(f"scan-reentrance: sign pattern {curve.sign_pattern()}")
    return EXIT_OK


# ---------------------------------------------------------------- scan-zeta
def cmd_scan_zeta(cfg: dict, writer: io.ArtifactWriter) -> int:
    params = cfgmod.to_params(cfg)
    points = experiments.scan_localization_length(
        cfg["zeta_w_bar"], cfg["d_grid"], cfg["xi_set"], params.n_sites, cfg["realizations"], cfg["seed"],
        level=cfg["reference_level"], base=params, **_run_kw(cfg),
    )
    tag = f"zeta_N{params.n_sites}_w{_fmt(cfg['zeta_w_bar'])}_seed{cfg['seed']}"
    writer.table(tag, ["xi", "xi_over_pi", "directionality", "t_ref", "n_L", "zeta_L", "r_squared", "ok", "reason"],
                 ([p.xi, p.xi / math.pi, p.directionality, p.t_ref, p.fit.n_L, p.fit.zeta_L, p.fit.r_squared,
                   p.fit.ok, p.reason] for p in points))
    _maybe_plot(cfg, writer, tag, lambda plt: plt.zeta_curves(points))
    print(f"scan-zeta: {sum(p.fit.ok for p in points)}/{len(points)} fits")
    return EXIT_OK


# ----------------------------------------------------------- spectral-stats
def cmd_spectral_stats(cfg: dict, writer: io.ArtifactWriter) -> int:
    params = cfgmod.to_params(cfg).replace(directionality=0.0, xi=cfg["spectral_xi"])
    reports = experiments.spectral_scan(params, cfg["w_list"], cfg["realizations"], cfg["seed"], cfg["bins"])
    tag = f"spectral_N{params.n_sites}_xi{_xi_tag(params.xi)}_seed{cfg['seed']}"
    writer.table(f"{tag}_table",
                 ["w_bar", "r_bar", "v_I", "r_a_std", "excluded_ratios", "max_residual_ratio", "max_trace_error"],
                 ([w, r.r_bar, r.v_I, float(np.std(r.r_a)), r.excluded, r.max_residual_ratio, r.max_trace_error]
                  for w, r in reports))
    edges = reports[0][1].bin_edges
    hist_cols = ["bin_low", "bin_high"] + [f"density_w{w:g}" for w, _ in reports]
    writer.table(f"{tag}_hist_per_gap_mean", hist_cols,
                 ([edges[k], edges[k + 1]] + [r.per_gap_hist[k] for _, r in reports] for k in range(len(edges) - 1)))
    writer.table(f"{tag}_hist_pooled", hist_cols,
                 ([edges[k], edges[k + 1]] + [r.pooled_hist[k] for _, r in reports] for k in range(len(edges) - 1)))
    writer.json(f"{tag}_summary", {"params": params.to_dict(), "r_goe": 0.53, "r_poisson": 0.39,
                                   "realizations": cfg["realizations"], "base_seed": cfg["seed"]})
    _maybe_plot(cfg, writer, tag, lambda plt: plt.gap_ratios([w for w, _ in reports],
                                                             [r.r_bar for _, r in reports],
                                                             [r.v_I for _, r in reports]))
    for w, r in reports:
        print(f"spectral-stats: w={w:g} r_bar={r.r_bar:.4f} <v_I>={r.v_I:.4f}")
    return EXIT_OK


# ------------------------------------------------------------- oracle-check
def cmd_oracle_check(cfg: dict, writer: io.ArtifactWriter) -> int:
    rows = oracles.run_all()
    print(oracles.format_table(rows))
    writer.table("oracle_check", ["check", "deviation", "tolerance", "passed"],
                 ([r.name, r.deviation, r.tolerance, r.passed] for r in rows))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_NUMERICAL


COMMANDS = {
    "simulate": cmd_simulate,
    "scan-boundary": cmd_scan_boundary,
    "scan-reentrance": cmd_scan_reentrance,
    "scan-zeta": cmd_scan_zeta,
    "spectral-stats": cmd_spectral_stats,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--out-dir", default="results", help="directory for emitted files (default: results)")
    for flag, key in PARAM_FLAGS.items():
        common.add_argument(flag, dest=key, default=None, help=cfgmod.SCHEMA[key].doc)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key")
    common.add_argument("--plot", action="store_const", const="true", default=None,
                        help="also render PNG figures next to the data files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="chiraloc",
        description="Disorder-averaged dynamics of chirally coupled emitter arrays.",
        epilog="configuration keys:\n" + cfgmod.describe(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"chiraloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in SUBCOMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "simulate":
            p.add_argument("--map", action="store_true",
                           help="run every w in map_w_list (population-map panels) instead of w_bar")
    rp = sub.add_parser("replay", help="re-run a manifest and compare content digests")
    rp.add_argument("manifest")
    rp.add_argument("--out-dir", default=None)
    return parser


def _overrides(args) -> dict:
    out = {key: getattr(args, key) for key in PARAM_FLAGS.values() if getattr(args, key, None) is not None}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(None, "command line", f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    if args.plot is not None:
        out["plot"] = args.plot
    return out


def execute(command: str, cfg: dict, out_dir, map_mode: bool = False) -> tuple[int, Path]:
    started = datetime.now(timezone.utc)
    writer = io.ArtifactWriter(out_dir)
    run_cfg = dict(cfg, _map=map_mode)
    status = COMMANDS[command](run_cfg, writer)
    snapshot = dict(cfg)
    if map_mode:
        snapshot["_map"] = True
    name = f"manifest_{command}_seed{cfg['seed']}"
    path = io.write_manifest(writer, command, snapshot, started, name)
    return status, path


def _replay(args) -> int:
    manifest = io.read_manifest(args.manifest)
    snapshot = dict(manifest["config_snapshot"])
    map_mode = bool(snapshot.pop("_map", False))
    cfg = cfgmod.resolve(None, snapshot)
    out_dir = Path(args.out_dir) if args.out_dir else Path(tempfile.mkdtemp(prefix="chiraloc-replay-"))
    _, path = execute(manifest["command"], cfg, out_dir, map_mode)
    fresh = io.read_manifest(path)["digests"]
    mismatched = sorted(k for k, v in manifest["digests"].items() if fresh.get(k) != v)
    if mismatched:
        print(json.dumps({"error": "replay", "mismatched": mismatched}), file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"replay: {len(fresh)} files reproduced byte-identically in {out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return _replay(args)
        cfg = cfgmod.resolve(args.config, _overrides(args))
        status, manifest = execute(args.command, cfg, args.out_dir, getattr(args, "map", False))
        log.info("manifest written to %s", manifest)
        return status
    except ConfigError as exc:
        print(json.dumps(exc.record()), file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(json.dumps({"error": "numerical", "message": str(exc),
                          "time": getattr(exc, "time", None)}), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
