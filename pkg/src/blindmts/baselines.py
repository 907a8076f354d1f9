"""Reference configurators compared against BCM."""
from __future__ import annotations

import numpy as np

from .channel import ChannelEnsemble
from .errors import ConfigurationError
from .layout import PhaseConfig
from .sampling import RssDataset, layout_of, collect_dataset, random_schedule


def zps(scene) -> PhaseConfig:
    """Zero phase shift on every atom."""
    return PhaseConfig.zeros(layout_of(scene))


def best_sample(dataset: RssDataset) -> PhaseConfig:
    """Configuration of the largest RSS in a dataset (earliest on ties)."""
    return PhaseConfig(dataset.layout, dataset.indices[int(np.argmax(dataset.rss))])


def beam_scanning(
    ensemble: ChannelEnsemble,
    T: int,
    seed: int,
    meas_noise_sigma: float = 0.0,
    threads: int = 1,
) -> PhaseConfig:
    """Try T uniform random configurations and keep the one with the best RSS.

    Draws the same schedule and measurements as
    ``collect_dataset(ensemble, random_schedule(ensemble, T, seed), ...)``.
    """
    schedule = random_schedule(ensemble, T, seed)
    return best_sample(collect_dataset(ensemble, schedule, meas_noise_sigma, seed, threads=threads))


def genie_closest_rotation(ensemble: ChannelEnsemble) -> PhaseConfig:
    """Rotate every mean reflected channel as close as possible to the mean direct channel."""
    m_d = ensemble.direct_mean()
    if abs(m_d) == 0.0:
        raise ConfigurationError("direct channel has zero mean; no reference phase")
    offset = np.angle(ensemble.reflected_mean()) - np.angle(m_d)
    layout = ensemble.layout
    choice = np.empty(layout.n_atoms, dtype=np.int64)
    for p, K in enumerate(layout.k_levels):
        sl = layout.panel_slice(p)
        levels = np.arange(K) * (2 * np.pi / K)
        score = np.cos(levels[None, :] + offset[sl, None])
        choice[sl] = np.argmax(score, axis=1)
    return PhaseConfig(layout, choice)
