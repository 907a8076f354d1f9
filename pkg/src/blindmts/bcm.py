"""Conditional-sample-mean statistics of an RSS dataset.

For every atom and phase level the RSS samples taken with that atom at that
level are averaged.  The level with the largest average is both the blind
configuration choice and the quantized estimate of the atom's phase
difference.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import ChannelEnsemble, mean_rss
from .errors import InsufficientSamplingError
from .geometry import wrap_2pi
from .layout import AtomLayout, PhaseConfig
from .sampling import RssDataset

# rows per pass; keeps the (chunk, n_atoms) temporaries cache-resident
GAIN_CHUNK = 512


@dataclass(frozen=True, eq=False)
class GainTable:
    """Per-panel (n_row, n_col, K) arrays.

    ``counts`` is None for tables computed from closed-form expectations.
    """

    layout: AtomLayout
    cond_mean: list[np.ndarray]
    j_hat: list[np.ndarray]
    counts: list[np.ndarray] | None
    global_mean: float

    @property
    def T(self) -> int | None:
        if self.counts is None:
            return None
        return int(self.counts[0][0, 0].sum()) if self.counts else 0


class GainAccumulator:
    """Running per-bin sums; feed record chunks with :meth:`update`."""

    def __init__(self, layout: AtomLayout):
        self.layout = layout
        self.sums = [np.zeros(s + (k,)) for s, k in zip(layout.shapes, layout.k_levels)]
        self.counts = [np.zeros(s + (k,), dtype=np.int64) for s, k in zip(layout.shapes, layout.k_levels)]
        self.total = 0.0
        self.n = 0

    def update(self, indices: np.ndarray, rss: np.ndarray) -> None:
        rss = np.asarray(rss, dtype=float)
        for p, (shape, k) in enumerate(zip(self.layout.shapes, self.layout.k_levels)):
            sub = indices[:, self.layout.panel_slice(p)]
            for level in range(k):
                hit = sub == level
                self.sums[p][..., level] += (rss @ hit).reshape(shape)
                self.counts[p][..., level] += hit.sum(axis=0).reshape(shape)
        self.total += float(rss.sum())
        self.n += rss.shape[0]

    def table(self) -> GainTable:
        if self.n == 0:
            raise ValueError("no records accumulated")
        for p, counts in enumerate(self.counts):
            empty = np.argwhere(counts == 0)
            if empty.size:
                u, v, k = (int(x) for x in empty[0])
                raise InsufficientSamplingError(p, u + 1, v + 1, k)
        global_mean = self.total / self.n
        cond = [s / c for s, c in zip(self.sums, self.counts)]
        return GainTable(
            self.layout,
            cond,
            [c - global_mean for c in cond],
            [c.copy() for c in self.counts],
            global_mean,
        )


def build_gain_table(dataset: RssDataset, chunk_size: int = GAIN_CHUNK) -> GainTable:
    """Conditional sample means and empirical gain function of a dataset.

    Single pass over the records in fixed-size chunks.  Raises
    :class:`InsufficientSamplingError` if any (atom, level) bin is empty.
    """
    acc = GainAccumulator(dataset.layout)
    for lo in range(0, dataset.T, chunk_size):
        acc.update(dataset.indices[lo : lo + chunk_size], dataset.rss[lo : lo + chunk_size])
    return acc.table()


def _argmax_levels(table: GainTable) -> list[np.ndarray]:
    # np.argmax returns the first maximum, i.e. ties go to the smallest index
    return [np.argmax(c, axis=-1) for c in table.cond_mean]


def select_phases(table: GainTable) -> PhaseConfig:
    """Per atom, the phase level with the largest conditional mean."""
    return PhaseConfig.from_panels(table.layout, _argmax_levels(table))


@dataclass(frozen=True, eq=False)
class DeltaEstimate:
    k_star: list[np.ndarray]
    delta_star: list[np.ndarray]  # radians in (0, 2*pi]


def recover_delta(table: GainTable) -> DeltaEstimate:
    """Quantized phase differences k* * omega, reported in (0, 2*pi].

    The empirical gain differs from the conditional mean by a constant, so the
    argmax is taken on the conditional mean; this keeps the indices identical
    to :func:`select_phases` even where subtracting the global mean rounds two
    levels into a tie.
    """
    k_star = _argmax_levels(table)
    delta = [wrap_2pi(k * (2 * np.pi / K)) for k, K in zip(k_star, table.layout.k_levels)]
    return DeltaEstimate(k_star, delta)


@dataclass(frozen=True, eq=False)
class BcmResult:
    theta_bcm: PhaseConfig
    delta_star: list[np.ndarray]
    k_star: list[np.ndarray]


def run_bcm(table: GainTable) -> BcmResult:
    delta = recover_delta(table)
    return BcmResult(select_phases(table), delta.delta_star, delta.k_star)


# ---------------------------------------------------------------------------
# closed-form oracle


@dataclass(frozen=True, eq=False)
class TrueGainParams:
    """Flat per-atom amplitude A and phase difference Delta, plus scale C."""

    layout: AtomLayout
    amplitude: np.ndarray
    delta_true: np.ndarray
    scale: float


def true_gain_params(ensemble: ChannelEnsemble) -> TrueGainParams:
    """Gain-function parameters implied by the ensemble's mean channels.

    A = 2 |E h_direct| |E h_n| and Delta = angle(E h_direct) - angle(E h_n);
    with uniform K-ary phases on every other atom, fixing atom n at level k
    shifts the mean RSS by tx_power * A * cos(k*omega - Delta).
    """
    m_d = ensemble.direct_mean()
    m_n = ensemble.reflected_mean()
    amp = 2.0 * abs(m_d) * np.abs(m_n)
    delta = wrap_2pi(np.angle(m_d) - np.angle(m_n))
    return TrueGainParams(ensemble.layout, amp, delta, ensemble.tx_power)


def exact_gain(params: TrueGainParams, k) -> np.ndarray:
    """C * A * cos(k*omega - Delta) per atom; ``k`` is a level or per-atom levels."""
    omega = params.layout.atom_phase_step
    return params.scale * params.amplitude * np.cos(np.asarray(k) * omega - params.delta_true)


def exact_conditional_table(ensemble: ChannelEnsemble, scene=None) -> GainTable:
    """Gain table with sample means replaced by exact conditional expectations."""
    params = true_gain_params(ensemble)
    layout = ensemble.layout
    base = mean_rss(ensemble)
    cond, jh = [], []
    for p, (shape, K) in enumerate(zip(layout.shapes, layout.k_levels)):
        sl = layout.panel_slice(p)
        omega = 2 * np.pi / K
        levels = np.arange(K) * omega
        gain = (
            params.scale
            * params.amplitude[sl, None]
            * np.cos(levels[None, :] - params.delta_true[sl, None])
        )
        c = (base + gain).reshape(shape + (K,))
        cond.append(c)
        jh.append(c - base)
    return GainTable(layout, cond, jh, None, base)


# ---------------------------------------------------------------------------
# export


def _atom_rows(layout: AtomLayout):
    for p, (r, c) in enumerate(layout.shapes):
        for u in range(r):
            for v in range(c):
                yield p, u, v


def save_gain_table(table: GainTable, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["panel", "u", "v", "k", "count", "cond_mean", "j_hat"])
        for p, u, v in _atom_rows(table.layout):
            for k in range(table.layout.k_levels[p]):
                count = "" if table.counts is None else int(table.counts[p][u, v, k])
                w.writerow(
                    [p, u + 1, v + 1, k, count, repr(float(table.cond_mean[p][u, v, k])),
                     repr(float(table.j_hat[p][u, v, k]))]
                )
    return path


def save_bcm_result(result: BcmResult, path) -> Path:
    path = Path(path)
    layout = result.theta_bcm.layout
    theta = result.theta_bcm.per_panel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["panel", "u", "v", "theta_index", "delta_star"])
        for p, u, v in _atom_rows(layout):
            w.writerow([p, u + 1, v + 1, int(theta[p][u, v]), repr(float(result.delta_star[p][u, v]))])
    return path

