"""Command-line front end.

Two subcommands:

``mmwtrack run``         simulate trials, batches or named experiment
                         presets and write summary.csv / trials.csv
                         (optionally per-slot traces) plus manifest.json.
``mmwtrack energy-table`` evaluate the closed-form tracking-energy table
                         over a refresh-period grid, no simulation.

Exit codes: 0 success, 2 configuration or validation error, 3 I/O error.
All CSV output uses '.' decimals, full-precision floats (repr) and LF
line endings, so a fixed (config, seed) reproduces identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

from . import __version__
from .energy import energy_event, total_energy
from .engine import PointSummary, SweepSpec, run_points, trial_seeds, run_trial
from .scenario import ConfigError, ScenarioConfig, load_config

FIG3_TREF_GRID = (0.01, 0.05, 0.1, 0.15, 0.3)
FIG4_TPR_GRID = (0.05, 0.1, 0.15, 0.3, 0.6, 0.9)
FIG5_TH_GRID = (0.01, 0.05, 0.1, 0.15, 0.6)
FIG6_TPR_GRID = (0.05, 0.1, 0.15, 0.3, 0.6, 0.9)
FIG7_KREF_GRID = (2, 4, 6, 8, 10)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def preset_points(name: str, base: ScenarioConfig) -> list[tuple[str, ScenarioConfig]]:
    """Labelled config grids reproducing the named experiments."""
    if name == "fig3":
        common = base.replace(t_pr=0.6, t_h=0.1, k_ref=2)
        points = [("A", common.replace(scheme="A").validate())]
        for tr in FIG3_TREF_GRID:
            points.append(
                (f"B t_ref={tr}", common.replace(scheme="B", t_ref=tr).validate())
            )
        return points
    if name == "fig4":
        common = base.replace(t_h=0.1, k_ref=2)
        points = []
        for tpr in FIG4_TPR_GRID:
            points.append((f"A t_pr={tpr}", common.replace(scheme="A", t_pr=tpr).validate()))
            points.append(
                (f"B t_pr={tpr}",
                 common.replace(scheme="B", t_pr=tpr, t_ref=0.01).validate())
            )
        return points
    if name == "fig5":
        common = base.replace(t_pr=0.3, k_ref=2)
        points = []
        for th in FIG5_TH_GRID:
            points.append((f"A t_h={th}", common.replace(scheme="A", t_h=th).validate()))
            for tr in (0.01, 0.05):
                points.append(
                    (f"B t_ref={tr} t_h={th}",
                     common.replace(scheme="B", t_ref=tr, t_h=th).validate())
                )
        return points
    if name == "fig7":
        common = base.replace(t_pr=0.3, t_h=0.1, t_ref=0.05)
        points = [("A", common.replace(scheme="A").validate())]
        for k in FIG7_KREF_GRID:
            points.append(
                (f"B k_ref={k}", common.replace(scheme="B", k_ref=k).validate())
            )
        return points
    raise ConfigError(f"unknown preset {name!r}")


def parse_sweep(text: str) -> SweepSpec:
    name, _, raw = text.partition("=")
    name = name.strip().lower()
    if not raw:
        raise ConfigError(f"--sweep must look like name=v1,v2,..., got {text!r}")
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if name in ("t_ref", "t_pr", "t_h"):
        values = tuple(float(p) for p in parts)
    elif name == "k_ref":
        values = tuple(int(p) for p in parts)
    elif name in ("bf_arch", "scheme"):
        values = tuple(p.upper() for p in parts)
    else:
        raise ConfigError(f"cannot sweep {name!r}")
    return SweepSpec(name=name, values=values)


# --------------------------------------------------------------------------
# output writers
# --------------------------------------------------------------------------

def write_summary(path, summaries: list[PointSummary]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([
            "point", "scheme", "bf_arch", "t_pr", "t_ref", "t_h", "k_ref",
            "trials", "mean_rate_bps", "stderr_rate_bps", "mean_energy_j",
            "refresh_count", "refinement_count", "refinement_event_j",
            "mean_handovers", "mean_beam_switches", "mean_tracking_loss_slots",
        ])
        for s in summaries:
            cfg = s.cfg
            n = len(s.results)
            ledger = s.results[0].energy
            w.writerow([
                s.label, cfg.scheme, cfg.bf_arch, _fmt(cfg.t_pr), _fmt(cfg.t_ref),
                _fmt(cfg.t_h), cfg.k_ref, n, _fmt(s.mean_rate), _fmt(s.stderr_rate),
                _fmt(s.mean_energy), ledger.refresh_count, ledger.refinement_count,
                _fmt(energy_event("refinement", cfg)),
                _fmt(sum(r.handover_count for r in s.results) / n),
                _fmt(sum(r.beam_switch_count for r in s.results) / n),
                _fmt(sum(r.tracking_loss_slots for r in s.results) / n),
            ])


def write_trials(path, summaries: list[PointSummary]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([
            "point", "trial", "seed", "avg_rate_bps", "energy_j",
            "handovers", "beam_switches", "tracking_loss_slots",
            "executed_refreshes", "executed_refinements",
            "n_enb", "n_background", "zero_redraws", "deployment_digest",
        ])
        for s in summaries:
            for ti, r in enumerate(s.results):
                w.writerow([
                    s.label, ti, r.seed, _fmt(r.avg_rate), _fmt(r.energy.total),
                    r.handover_count, r.beam_switch_count, r.tracking_loss_slots,
                    r.executed_refreshes, r.executed_refinements,
                    r.n_enb, r.n_background, r.zero_redraws, r.deployment_digest,
                ])


def write_trace(path, result, cfg: ScenarioConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "time_s", "rate_bps", "serving", "enb_dir", "ue_dir", "event"])
        for n in range(len(result.rate_trace)):
            w.writerow([
                n, _fmt(n * cfg.slot), _fmt(float(result.rate_trace[n])),
                int(result.serving_trace[n]), int(result.enb_dir_trace[n]),
                int(result.ue_dir_trace[n]), int(result.event_trace[n]),
            ])


def write_events(path, result) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "kind", "outcome",
                    "old_enb", "old_enb_dir", "old_ue_dir",
                    "new_enb", "new_enb_dir", "new_ue_dir"])
        for e in result.event_log:
            old = e.old if e.old is not None else ("", "", "")
            new = e.new if e.new is not None else ("", "", "")
            w.writerow([_fmt(e.time), e.kind.value, e.outcome, *old, *new])


_STATE_NAMES = {0: "los", 1: "nlos", 2: "outage"}


def write_channel_trace(path, result, cfg: ScenarioConfig) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "time_s", "link", "state", "pathloss_db", "h_frobenius_sq"])
        trace = result.channel_trace
        for n in range(trace.shape[0]):
            for m in range(trace.shape[1]):
                w.writerow([
                    n, _fmt(n * cfg.slot), m,
                    _STATE_NAMES[int(trace[n, m, 0])],
                    _fmt(float(trace[n, m, 1])), _fmt(float(trace[n, m, 2])),
                ])


def write_energy_table(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([
            "t_pr", "bf_arch", "scheme", "refresh_count", "refinement_count",
            "refresh_energy_j", "refinement_energy_j", "total_energy_j",
        ])
        for row in rows:
            w.writerow(row)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, cfg: ScenarioConfig, args_record: dict,
                   outputs: list[str], started: float) -> None:
    manifest = {
        "tool": "mmwtrack",
        "version": __version__,
        "config": cfg.to_text(),
        "invocation": args_record,
        "outputs": {name: _sha256(os.path.join(out_dir, name)) for name in outputs},
        "runtime_s": time.time() - started,
    }
    final = os.path.join(out_dir, "manifest.json")
    tmp = final + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, final)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_run(args) -> int:
    started = time.time()
    cfg = load_config(args.config) if args.config else ScenarioConfig().validate()
    if args.scheme:
        cfg = cfg.replace(scheme=args.scheme).validate()
    seed = args.seed if args.seed is not None else cfg.seed
    trials = args.trials if args.trials is not None else cfg.trials

    if args.preset == "fig6":
        return cmd_energy_table(argparse.Namespace(
            config=args.config, grid="t_pr=" + ",".join(str(v) for v in FIG6_TPR_GRID),
            arch="both", out_dir=args.out_dir, quiet=args.quiet,
        ))
    if args.preset:
        points = preset_points(args.preset, cfg)
    elif args.sweep:
        spec = parse_sweep(args.sweep)
        points = [
            (f"{spec.name}={v}", c)
            for v, c in zip(spec.values, spec.points(cfg))
        ]
    else:
        points = [("run", cfg)]

    summaries = run_points(points, trials, seed)
    if not args.quiet:
        for s in summaries:
            print(
                f"{s.label}: mean rate {s.mean_rate / 1e9:.4f} Gbps "
                f"(stderr {s.stderr_rate / 1e9:.4f}), energy {s.mean_energy:.4f} J"
            )

    os.makedirs(args.out_dir, exist_ok=True)
    outputs = ["summary.csv", "trials.csv"]
    write_summary(os.path.join(args.out_dir, "summary.csv"), summaries)
    write_trials(os.path.join(args.out_dir, "trials.csv"), summaries)
    if args.trace or args.channel_trace:
        seeds = trial_seeds(seed, trials)
        for pi, s in enumerate(summaries):
            for ti in range(trials):
                res = run_trial(s.cfg, seeds[ti], keep_trace=True,
                                keep_channel_trace=args.channel_trace)
                if args.trace:
                    name = f"trace_p{pi}_t{ti}.csv"
                    write_trace(os.path.join(args.out_dir, name), res, s.cfg)
                    outputs.append(name)
                    name = f"events_p{pi}_t{ti}.csv"
                    write_events(os.path.join(args.out_dir, name), res)
                    outputs.append(name)
                if args.channel_trace:
                    name = f"channel_trace_p{pi}_t{ti}.csv"
                    write_channel_trace(os.path.join(args.out_dir, name), res, s.cfg)
                    outputs.append(name)
    record = {
        "command": "run", "config_path": args.config, "seed": seed,
        "trials": trials, "scheme": args.scheme, "sweep": args.sweep,
        "preset": args.preset, "trace": bool(args.trace),
        "channel_trace": bool(args.channel_trace),
    }
    write_manifest(args.out_dir, cfg, record, outputs, started)
    return 0


def cmd_energy_table(args) -> int:
    started = time.time()
    cfg = load_config(args.config) if args.config else ScenarioConfig().validate()
    name, _, raw = args.grid.partition("=")
    if name.strip().lower() != "t_pr" or not raw:
        raise ConfigError(f"--grid must look like t_pr=v1,v2,..., got {args.grid!r}")
    grid = [float(p) for p in raw.split(",") if p.strip()]
    arches = ("ABF", "DBF") if args.arch == "both" else (args.arch,)
    rows = []
    for tpr in grid:
        for arch in arches:
            for scheme in ("A", "B"):
                point = cfg.replace(t_pr=tpr, bf_arch=arch, scheme=scheme).validate()
                ledger = total_energy(scheme, point)
                rows.append([
                    _fmt(tpr), arch, scheme, ledger.refresh_count,
                    ledger.refinement_count, _fmt(ledger.refresh_energy),
                    _fmt(ledger.refinement_energy), _fmt(ledger.total),
                ])
    os.makedirs(args.out_dir, exist_ok=True)
    write_energy_table(os.path.join(args.out_dir, "energy_table.csv"), rows)
    if not args.quiet:
        print(f"energy table: {len(rows)} rows -> {args.out_dir}/energy_table.csv")
    record = {"command": "energy-table", "config_path": args.config,
              "grid": args.grid, "arch": args.arch}
    write_manifest(args.out_dir, cfg, record, ["energy_table.csv"], started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmwtrack",
        description="Monte Carlo comparison of mmWave beam-tracking schemes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate trials, sweeps or presets")
    run_p.add_argument("--config", help="config file path (defaults apply if omitted)")
    run_p.add_argument("--seed", type=int, default=None, help="master seed")
    run_p.add_argument("--trials", type=int, default=None, help="trials per point")
    run_p.add_argument("--scheme", choices=("A", "B"), default=None)
    run_p.add_argument("--sweep", help="parameter sweep, e.g. t_ref=0.01,0.05,0.1")
    run_p.add_argument("--preset", choices=("fig3", "fig4", "fig5", "fig6", "fig7"))
    run_p.add_argument("--out-dir", default="out", help="output directory")
    run_p.add_argument("--trace", action="store_true",
                       help="dump per-slot rate traces and event logs")
    run_p.add_argument("--channel-trace", action="store_true",
                       help="debug: dump per-slot, per-link channel state")
    run_p.add_argument("--quiet", action="store_true")
    run_p.set_defaults(func=cmd_run)

    et_p = sub.add_parser("energy-table", help="closed-form tracking energy table")
    et_p.add_argument("--config", help="config file path")
    et_p.add_argument("--grid", required=True, help="refresh periods, e.g. t_pr=0.05,0.1")
    et_p.add_argument("--arch", choices=("ABF", "DBF", "both"), default="both")
    et_p.add_argument("--out-dir", default="out", help="output directory")
    et_p.add_argument("--quiet", action="store_true")
    et_p.set_defaults(func=cmd_energy_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
