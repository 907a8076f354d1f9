"""Command line entry point: ``blindmts <subcommand>``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bcm import build_gain_table, exact_conditional_table
from .channel import expected_snr
from .errors import BlindMtsError
from .harness import ExperimentConfig, emit_results, loglog_slope, run_experiment, summarize
from .layout import PhaseConfig
from .sampling import collect_dataset, exhaustive_schedule, load_dataset, random_schedule, save_dataset
from .scenario import load_scenario

SCALING_SCENE = "builtin:scaling"
TINY_SCENE = "builtin:tiny"


def _formats(fmt: str | None) -> tuple[str, ...]:
    return (fmt,) if fmt else ("csv", "json")


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = Path(args.out) if args.out else cfg.base_dir / cfg.output_dir
    records = run_experiment(cfg, master_seed=args.seed, threads=args.threads)
    emit_results(records, out, _formats(args.format))
    failed = [r for r in records if r.status != "ok"]
    for row in summarize(records):
        print(f"{row['x']:>24} {row['algorithm']:>14} {row['metric']:>14} "
              f"mean={row['mean']:.4g} stderr={row['stderr']:.3g} n={row['n']}")
    for r in failed:
        print(f"FAILED value={r.value} seed={r.seed} algorithm={r.algorithm}: {r.message}", file=sys.stderr)
    print(f"{len(records)} records, {len(failed)} failed, written to {out}")
    return 0 if not failed else 1


def cmd_scaling(args) -> int:
    sizes = [int(n) for n in args.sizes.split(",")]
    cfg = ExperimentConfig(
        scene=args.scene,
        algorithms=["bcm"],
        sweep_axis="scaling_N",
        sweep_values=sizes,
        seeds=[0],
        oracle_mode=True,
        sensing=False,
    )
    records = run_experiment(cfg, master_seed=args.seed, threads=args.threads)
    if args.out:
        emit_results(records, args.out, _formats(args.format))
    if any(r.status != "ok" for r in records):
        for r in records:
            print(f"N={r.value} {r.status} {r.message}")
        return 1
    base = load_scenario(args.scene)
    bare = base.ensemble().without_panels()
    snr0 = expected_snr(bare, PhaseConfig.zeros(bare.layout))
    snrs = [snr0 * 10 ** (r.snr_boost_db / 10) for r in records]
    for n, s in zip(sizes, snrs):
        print(f"N={n:<6} expected_snr={s:.6g}")
    slope = loglog_slope(sizes, snrs)
    print(f"log-log slope = {slope:.4f}")
    return 0


def cmd_oracle_check(args) -> int:
    sc = load_scenario(args.scene)
    ens = sc.ensemble()
    sched = exhaustive_schedule(ens, cap=args.cap)
    ds = collect_dataset(ens, sched, 0.0, args.seed)
    emp = build_gain_table(ds)
    exact = exact_conditional_table(ens)
    worst = 0.0
    for a, b in zip(emp.cond_mean, exact.cond_mean):
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))))
    ok = worst <= args.tol
    print(f"{len(sched)} configurations, max relative deviation {worst:.3e} ({'ok' if ok else 'MISMATCH'})")
    return 0 if ok else 1


def cmd_dataset_collect(args) -> int:
    sc = load_scenario(args.scene)
    ens = sc.ensemble()
    sigma = sc.channel.meas_noise_sigma if args.sigma is None else args.sigma
    ds = collect_dataset(ens, random_schedule(ens, args.samples, args.seed), sigma, args.seed, threads=args.threads)
    out = Path(args.out or f"dataset.{args.format or 'csv'}")
    fmt = "npz" if (args.format == "npz" or out.suffix == ".npz") else "csv"
    save_dataset(ds, out, fmt)
    print(f"wrote {ds.T} records over {ds.layout.n_atoms} atoms to {out}")
    return 0


def cmd_dataset_inspect(args) -> int:
    ds = load_dataset(args.path)
    counts = ds.bin_counts()
    print(f"records:      {ds.T}")
    print(f"panels:       {', '.join(f'{r}x{c}' for r, c in ds.layout.shapes)}")
    print(f"levels:       {', '.join(str(k) for k in ds.layout.k_levels)}")
    print(f"master seed:  {ds.master_seed}")
    print(f"fingerprint:  {ds.scene_fingerprint or '-'}")
    print(f"rss:          min={ds.rss.min():.4g} mean={ds.rss.mean():.4g} max={ds.rss.max():.4g}")
    print(f"min bin size: {min(int(c.min()) for c in counts)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out", help="output directory or file")
    common.add_argument("--format", choices=["csv", "json", "npz"], help="output format")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")

    parser = argparse.ArgumentParser(prog="blindmts", description="Blind metasurface configuration simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scaling", parents=[common], help="SNR vs atom count with exact expectations")
    p.add_argument("--scene", default=SCALING_SCENE)
    p.add_argument("--sizes", default="16,64,256", help="comma separated atoms per panel")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("oracle-check", parents=[common], help="exhaustive dataset vs exact conditional means")
    p.add_argument("--scene", default=TINY_SCENE)
    p.add_argument("--cap", type=int, default=2**16, help="maximum number of configurations")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("dataset", help="collect or inspect RSS datasets")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    q = dsub.add_parser("collect", parents=[common])
    q.add_argument("scene")
    q.add_argument("--samples", "-T", type=int, default=3000)
    q.add_argument("--sigma", type=float, help="override the scene's measurement noise")
    q.set_defaults(func=cmd_dataset_collect)
    q = dsub.add_parser("inspect")
    q.add_argument("path")
    q.set_defaults(func=cmd_dataset_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "format", None) == "npz" and args.command != "dataset":
        print("--format npz only applies to datasets", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (BlindMtsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
