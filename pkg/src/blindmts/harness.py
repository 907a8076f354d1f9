"""Config-driven sweeps over scenes, algorithms and seeds.

A run is a grid of cells, one per (sweep value, seed).  Every algorithm in a
cell shares the same scene, ensemble and RSS dataset, and each cell draws its
randomness only from (master seed, seed), so results do not depend on how
cells are scheduled across threads.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import sys
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import best_sample, genie_closest_rotation, zps
from .bcm import build_gain_table, exact_conditional_table, run_bcm
from .channel import ChannelEnsemble, expected_snr
from .errors import BlindMtsError, ConfigurationError
from .layout import PhaseConfig
from .sampling import collect_dataset, random_schedule
from .scenario import Scenario, load_scenario
from .sensing import localize_from_delta, squared_error

ALGORITHMS = ("zps", "beam_scanning", "genie", "bcm")
AXES = ("none", "tx_power", "T", "NK", "placement", "los_nlos", "scaling_N")

DEFAULT_SWEEPS = {
    "tx_power": [-10, -5, 0, 5, 10],
    "T": [1000, 2000, 3000],
    "NK": [[200, 4], [200, 2], [100, 4], [100, 2]],
    "placement": ["builtin:placement_a", "builtin:placement_b", "builtin:placement_c", "builtin:placement_d"],
    "los_nlos": ["los", "nlos"],
    "scaling_N": [16, 64, 256],
    "none": [""],
}


@dataclass
class ExperimentConfig:
    scene: str
    algorithms: list[str]
    sweep_axis: str = "none"
    sweep_values: list = field(default_factory=list)
    seeds: list[int] = field(default_factory=lambda: [0])
    samples: int = 3000
    output_dir: str = "results"
    oracle_mode: bool = False
    sensing: bool = True
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigurationError("at least one algorithm is required")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigurationError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        if not self.seeds:
            raise ConfigurationError("seeds must be non-empty")
        if self.sweep_axis not in AXES:
            raise ConfigurationError(f"unknown sweep axis {self.sweep_axis!r}; choose from {AXES}")
        if not self.sweep_values:
            self.sweep_values = list(DEFAULT_SWEEPS[self.sweep_axis])
        if self.samples < 1:
            raise ConfigurationError("samples must be >= 1")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        sweep = data.get("sweep", {})
        return cls(
            scene=data["scene"],
            algorithms=list(data.get("algorithms", ALGORITHMS)),
            sweep_axis=sweep.get("axis", "none"),
            sweep_values=list(sweep.get("values", [])),
            seeds=[int(s) for s in data.get("seeds", [0])],
            samples=int(data.get("samples", 3000)),
            output_dir=data.get("output_dir", "results"),
            oracle_mode=bool(data.get("oracle_mode", False)),
            sensing=bool(data.get("sensing", True)),
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with path.open("rb") as fh:
            return cls.from_dict(tomllib.load(fh), path.parent)


@dataclass
class MetricRecord:
    axis: str
    value: str
    seed: int
    algorithm: str
    status: str = "ok"
    snr_boost_db: float | None = None
    squared_error: float | None = None
    message: str = ""
    wall_time: float = field(default=0.0, compare=False)


CSV_FIELDS = ["axis", "value", "seed", "algorithm", "status", "snr_boost_db", "squared_error", "message"]


# ---------------------------------------------------------------------------
# scenario variants per sweep value


def panel_shape_for(n: int) -> tuple[int, int]:
    """Most square (rows, cols) factorisation of n with rows <= cols."""
    rows = max(d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0)
    return rows, n // rows


def _reshape_panels(sc: Scenario, n: int, k: int | None = None) -> Scenario:
    """Resize so the panels hold ``n`` atoms in total, split evenly."""
    n_panels = len(sc.scene.panels)
    if n_panels == 0 or int(n) % n_panels:
        raise ConfigurationError(f"{n} atoms cannot be split evenly over {n_panels} panels")
    rows, cols = panel_shape_for(int(n) // n_panels)
    panels = [
        dataclasses.replace(p, n_row=rows, n_col=cols, k_levels=int(k) if k is not None else p.k_levels)
        for p in sc.scene.panels
    ]
    return sc.with_panels(panels)


def value_label(value) -> str:
    if isinstance(value, (list, tuple)):
        return "x".join(str(v) for v in value)
    return str(value)


def cell_scenario(cfg: ExperimentConfig, base: Scenario, value) -> tuple[Scenario, int]:
    """Scenario and sample count of one sweep value."""
    axis, T = cfg.sweep_axis, cfg.samples
    if axis in ("none", "T"):
        sc = base
        T = int(value) if axis == "T" else T
    elif axis == "tx_power":
        sc = base.with_channel(tx_power_dbm=float(value))
    elif axis == "NK":
        n, k = value
        sc = _reshape_panels(base, n, k)
    elif axis == "scaling_N":
        sc = _reshape_panels(base, value)
    elif axis == "placement":
        sc = load_scenario(value, cfg.base_dir)
    elif axis == "los_nlos":
        if value not in ("los", "nlos"):
            raise ConfigurationError(f"los_nlos values must be 'los' or 'nlos', got {value!r}")
        sc = base.with_channel(nlos=(value == "nlos"))
    else:  # pragma: no cover - guarded by ExperimentConfig
        raise ConfigurationError(axis)
    return sc, T


def cell_seed(master_seed: int, seed: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(seed)]).generate_state(1, np.uint64)[0] >> 1)


# ---------------------------------------------------------------------------
# metrics


def snr_boost(ensemble_with_panels: ChannelEnsemble, config: PhaseConfig, ensemble_without_panels: ChannelEnsemble) -> float:
    """10*log10 of configured SNR over the SNR without panels."""
    bare = ensemble_without_panels.without_panels()
    denom = expected_snr(bare, PhaseConfig.zeros(bare.layout))
    if denom <= 0:
        raise ZeroDivisionError("SNR without panels is zero")
    return 10.0 * math.log10(expected_snr(ensemble_with_panels, config) / denom)


def _run_cell(cfg: ExperimentConfig, base: Scenario | None, vi: int, seed: int, master_seed: int) -> list[MetricRecord]:
    value = cfg.sweep_values[vi]
    label = value_label(value)

    def rec(alg, **kw):
        return MetricRecord(cfg.sweep_axis, label, seed, alg, **kw)

    try:
        if base is None:
            base = load_scenario(cfg.scene, cfg.base_dir)
        sc, T = cell_scenario(cfg, base, value)
        ens = sc.ensemble()
    except (BlindMtsError, ValueError, OSError) as exc:
        return [rec(a, status="error", message=f"{type(exc).__name__}: {exc}") for a in cfg.algorithms]

    cseed = cell_seed(master_seed, seed)
    sigma = sc.channel.meas_noise_sigma
    dataset = None
    out = []
    for alg in cfg.algorithms:
        t0 = time.perf_counter()
        r = rec(alg)
        try:
            needs_data = alg == "beam_scanning" or (alg == "bcm" and not cfg.oracle_mode)
            if needs_data and dataset is None:
                dataset = collect_dataset(ens, random_schedule(ens, T, cseed), sigma, cseed)
            if alg == "zps":
                config = zps(ens)
            elif alg == "genie":
                config = genie_closest_rotation(ens)
            elif alg == "beam_scanning":
                config = best_sample(dataset)
            else:
                table = exact_conditional_table(ens) if cfg.oracle_mode else build_gain_table(dataset)
                result = run_bcm(table)
                config = result.theta_bcm
            r.snr_boost_db = snr_boost(ens, config, ens)
            if alg == "bcm" and cfg.sensing and sum(p.supports_sensing for p in sc.scene.panels) >= 2:
                try:
                    est = localize_from_delta(result.delta_star, sc.scene)
                    r.squared_error = squared_error(est.position, sc.scene)
                except BlindMtsError as exc:
                    r.status = "error"
                    r.message = f"sensing: {type(exc).__name__}: {exc}"
        except (BlindMtsError, ValueError, ZeroDivisionError) as exc:
            r.status = "error"
            r.message = f"{type(exc).__name__}: {exc}"
        r.wall_time = time.perf_counter() - t0
        out.append(r)
    return out


def run_experiment(cfg: ExperimentConfig, master_seed: int = 0, threads: int = 1) -> list[MetricRecord]:
    """All (sweep value, seed, algorithm) records in canonical order."""
    base = None
    if cfg.sweep_axis != "placement":
        base = load_scenario(cfg.scene, cfg.base_dir)
    cells = [(vi, s) for vi in range(len(cfg.sweep_values)) for s in cfg.seeds]

    def work(cell):
        return _run_cell(cfg, base, cell[0], cell[1], master_seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, cells))
    else:
        chunks = [work(c) for c in cells]
    return [r for chunk in chunks for r in chunk]


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def records_from_csv(text: str) -> list[MetricRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            MetricRecord(
                axis=row["axis"],
                value=row["value"],
                seed=int(row["seed"]),
                algorithm=row["algorithm"],
                status=row["status"],
                snr_boost_db=float(row["snr_boost_db"]) if row["snr_boost_db"] else None,
                squared_error=float(row["squared_error"]) if row["squared_error"] else None,
                message=row["message"],
            )
        )
    return out


def summarize(records) -> list[dict]:
    """Mean and standard error (sample std / sqrt(n)) per (value, algorithm, metric)."""
    groups = defaultdict(list)
    order = []
    for r in records:
        if r.status != "ok" and r.snr_boost_db is None:
            continue
        for metric in ("snr_boost_db", "squared_error"):
            x = getattr(r, metric)
            if x is None:
                continue
            key = (r.axis, r.value, r.algorithm, metric)
            if key not in groups:
                order.append(key)
            groups[key].append(x)
    rows = []
    for key in order:
        xs = np.asarray(groups[key], dtype=float)
        stderr = float(xs.std(ddof=1) / math.sqrt(xs.size)) if xs.size > 1 else float("nan")
        rows.append(
            {"axis": key[0], "x": key[1], "algorithm": key[2], "metric": key[3],
             "n": int(xs.size), "mean": float(xs.mean()), "stderr": stderr}
        )
    return rows


def emit_results(records, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write metrics (CSV and/or JSON), per-sweep summary CSV and wall times.

    Metric files are byte-identical across reruns; wall-clock times go to a
    separate ``timings.csv``.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = out / "metrics.csv"
        p.write_text(records_to_csv(records))
        written.append(p)
    if "json" in formats:
        p = out / "metrics.json"
        rows = [{f: getattr(r, f) for f in CSV_FIELDS} for r in records]
        p.write_text(json.dumps(rows, indent=1) + "\n")
        written.append(p)
    p = out / "summary.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "x", "algorithm", "metric", "n", "mean", "stderr"])
        for row in summarize(records):
            w.writerow([row["axis"], row["x"], row["algorithm"], row["metric"], row["n"],
                        repr(row["mean"]), repr(row["stderr"])])
    written.append(p)
    p = out / "timings.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "seed", "algorithm", "wall_time_s"])
        for r in records:
            w.writerow([r.value, r.seed, r.algorithm, f"{r.wall_time:.6f}"])
    written.append(p)
    return written


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
