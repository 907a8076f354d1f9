"""Random configuration schedules and RSS dataset collection."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ChannelEnsemble, measure_rss_batch
from .errors import DimensionError, ScheduleTooLargeError
from .layout import AtomLayout, PhaseConfig

__all__ = [
    "PhaseConfig",
    "Schedule",
    "RssDataset",
    "derive_rng",
    "random_schedule",
    "exhaustive_schedule",
    "collect_dataset",
    "save_dataset",
    "load_dataset",
]

DEFAULT_CHUNK = 4096
EXHAUSTIVE_CAP = 2**20

# spawn keys of the independent random streams derived from a master seed
_SCHEDULE_STREAM = 0
_MEASUREMENT_STREAM = 1


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(key)))


def layout_of(obj) -> AtomLayout:
    if isinstance(obj, AtomLayout):
        return obj
    if hasattr(obj, "layout"):
        return obj.layout
    return AtomLayout.from_scene(obj)


@dataclass(frozen=True, eq=False)
class Schedule:
    """T configurations stored as a (T, n_atoms) index matrix."""

    layout: AtomLayout
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != self.layout.n_atoms:
            raise DimensionError(f"schedule shape {idx.shape} does not match {self.layout.n_atoms} atoms")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __getitem__(self, t: int) -> PhaseConfig:
        return PhaseConfig(self.layout, self.indices[t])

    def __iter__(self):
        for t in range(len(self)):
            yield self[t]

    @classmethod
    def from_configs(cls, configs) -> "Schedule":
        configs = list(configs)
        if not configs:
            raise ValueError("empty schedule")
        return cls(configs[0].layout, np.stack([c.indices for c in configs]))


def random_schedule(scene, T: int, master_seed: int) -> Schedule:
    """T configurations with every index i.i.d. uniform over its panel's K levels."""
    if T < 1:
        raise ValueError("T must be >= 1")
    layout = layout_of(scene)
    rng = derive_rng(master_seed, _SCHEDULE_STREAM)
    idx = rng.integers(0, layout.atom_levels, size=(T, layout.n_atoms))
    return Schedule(layout, idx)


def exhaustive_schedule(scene, cap: int = EXHAUSTIVE_CAP) -> Schedule:
    """Every joint configuration once, lexicographic with the first atom most significant."""
    layout = layout_of(scene)
    levels = layout.atom_levels
    total = math.prod(int(k) for k in levels)
    if total > cap:
        raise ScheduleTooLargeError(f"{total} configurations exceed the cap of {cap}")
    rest = np.arange(total, dtype=np.int64)
    idx = np.empty((total, layout.n_atoms), dtype=np.int64)
    for i in range(layout.n_atoms - 1, -1, -1):
        rest, idx[:, i] = np.divmod(rest, levels[i])
    return Schedule(layout, idx)


@dataclass(frozen=True, eq=False)
class RssDataset:
    layout: AtomLayout
    indices: np.ndarray  # (T, n_atoms) phase indices
    rss: np.ndarray  # (T,)
    master_seed: int | None = None
    scene_fingerprint: str = ""

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        rss = np.asarray(self.rss, dtype=float)
        if idx.ndim != 2 or idx.shape[1] != self.layout.n_atoms:
            raise DimensionError(f"indices shape {idx.shape} does not match {self.layout.n_atoms} atoms")
        if rss.shape != (idx.shape[0],):
            raise DimensionError("one RSS value per record is required")
        if idx.shape[0] < 1:
            raise ValueError("dataset needs at least one record")
        if np.any(rss < 0) or not np.all(np.isfinite(rss)):
            raise ValueError("RSS values must be finite and non-negative")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "rss", rss)

    @property
    def T(self) -> int:
        return self.indices.shape[0]

    def records(self):
        for t in range(self.T):
            yield PhaseConfig(self.layout, self.indices[t]), float(self.rss[t])

    def bin_counts(self) -> list[np.ndarray]:
        """|Q| per panel as (n_row, n_col, K) integer arrays."""
        out = []
        for p, (shape, k) in enumerate(zip(self.layout.shapes, self.layout.k_levels)):
            sub = self.indices[:, self.layout.panel_slice(p)]
            counts = np.stack([(sub == level).sum(axis=0) for level in range(k)], axis=-1)
            out.append(counts.reshape(shape + (k,)))
        return out

    def head(self, n: int) -> "RssDataset":
        return RssDataset(self.layout, self.indices[:n], self.rss[:n], self.master_seed, self.scene_fingerprint)

    def __eq__(self, other):
        if not isinstance(other, RssDataset):
            return NotImplemented
        return (
            self.layout == other.layout
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.rss, other.rss)
            and self.master_seed == other.master_seed
            and self.scene_fingerprint == other.scene_fingerprint
        )


def collect_dataset(
    ensemble: ChannelEnsemble,
    schedule: Schedule,
    meas_noise_sigma: float,
    master_seed: int,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> RssDataset:
    """Measure one RSS per scheduled configuration, each under fresh fading.

    Chunk c of ``chunk_size`` records always draws from its own stream derived
    from ``master_seed``, so the output does not depend on ``threads``.
    """
    if len(schedule) < 1:
        raise ValueError("schedule is empty")
    if schedule.layout.n_atoms != ensemble.n_atoms:
        raise DimensionError("schedule and ensemble disagree on the number of atoms")
    T = len(schedule)
    starts = list(range(0, T, chunk_size))

    def work(c):
        lo = starts[c]
        rng = derive_rng(master_seed, _MEASUREMENT_STREAM, c)
        return measure_rss_batch(ensemble, schedule.indices[lo : lo + chunk_size], meas_noise_sigma, rng)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(starts))))
    else:
        parts = [work(c) for c in range(len(starts))]
    return RssDataset(
        schedule.layout,
        schedule.indices,
        np.concatenate(parts),
        master_seed=master_seed,
        scene_fingerprint=ensemble.scene_fingerprint,
    )


# ---------------------------------------------------------------------------
# persistence

_MAGIC = "blindmts-dataset v1"


def _header(ds: RssDataset) -> dict:
    return {
        "T": ds.T,
        "shapes": [list(s) for s in ds.layout.shapes],
        "k_levels": list(ds.layout.k_levels),
        "master_seed": ds.master_seed,
        "scene_fingerprint": ds.scene_fingerprint,
    }


def _from_header(meta: dict, indices, rss) -> RssDataset:
    layout = AtomLayout(tuple(tuple(s) for s in meta["shapes"]), tuple(meta["k_levels"]))
    ds = RssDataset(layout, indices, rss, meta.get("master_seed"), meta.get("scene_fingerprint", ""))
    if ds.T != meta["T"]:
        raise ValueError(f"header says T={meta['T']} but file holds {ds.T} records")
    return ds


def save_dataset(ds: RssDataset, path, fmt: str | None = None) -> Path:
    """Write a dataset as CSV (with a commented JSON header) or as ``.npz``."""
    path = Path(path)
    fmt = fmt or ("npz" if path.suffix == ".npz" else "csv")
    if fmt == "npz":
        np.savez(path, indices=ds.indices, rss=ds.rss, header=json.dumps(_header(ds)))
        return path
    if fmt != "csv":
        raise ValueError(f"unknown dataset format {fmt!r}")
    cols = []
    for p in range(ds.layout.n_panels):
        r, c = ds.layout.shapes[p]
        cols += [f"p{p}_u{u}_v{v}" for u in range(1, r + 1) for v in range(1, c + 1)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# {_MAGIC}\n")
        fh.write("# " + json.dumps(_header(ds), sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(cols + ["S"])
        for row, s in zip(ds.indices.tolist(), ds.rss.tolist()):
            w.writerow(row + [repr(s)])
    return path


def load_dataset(path) -> RssDataset:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            return _from_header(json.loads(str(z["header"])), z["indices"], z["rss"])
    with open(path, newline="") as fh:
        magic = fh.readline().strip()
        if magic != f"# {_MAGIC}":
            raise ValueError(f"{path} is not a dataset file")
        meta = json.loads(fh.readline()[1:])
        reader = csv.reader(fh)
        next(reader)
        idx, rss = [], []
        for row in reader:
            idx.append([int(x) for x in row[:-1]])
            rss.append(float(row[-1]))
    return _from_header(meta, np.array(idx, dtype=np.int64).reshape(len(idx), -1), np.array(rss))
