"""Rician channel synthesis, cascaded reflections and SNR evaluation.

Noise power is normalised to one, so received power and SNR share units and
``tx_power`` is a linear factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DimensionError
from .geometry import SceneGeometry, link_angles, los_phases, wrap_pi
from .layout import AtomLayout, PhaseConfig

LINK_CLASSES = ("direct", "tx_panel", "panel_rx")


@dataclass(frozen=True, eq=False)
class RicianLink:
    """Parameters of one elementary link, or of an array of links.

    ``rician_factor`` may be ``inf`` (pure line of sight, no fading).
    """

    attenuation: np.ndarray | float
    rician_factor: np.ndarray | float
    los_phase: np.ndarray | float

    @property
    def los_weight(self):
        d = np.asarray(self.rician_factor, dtype=float)
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(d), 1.0, np.sqrt(d / (1.0 + d)))

    @property
    def fading_weight(self):
        d = np.asarray(self.rician_factor, dtype=float)
        return np.where(np.isinf(d), 0.0, np.sqrt(1.0 / (1.0 + d)))

    def mean(self):
        return np.sqrt(self.attenuation) * self.los_weight * np.exp(1j * np.asarray(self.los_phase))

    def second_moment(self):
        return np.asarray(self.attenuation, dtype=float)

    def variance(self):
        return np.asarray(self.attenuation, dtype=float) * self.fading_weight**2


@dataclass(frozen=True)
class RicianFactors:
    direct: float = math.inf
    tx_panel: float = math.inf
    panel_rx: float = math.inf

    def __post_init__(self):
        for name in LINK_CLASSES:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"Rician factor for {name} must be positive")

    @classmethod
    def pure_los(cls) -> "RicianFactors":
        return cls()

    @classmethod
    def uniform(cls, delta: float) -> "RicianFactors":
        return cls(delta, delta, delta)

    @property
    def is_pure_los(self) -> bool:
        return all(math.isinf(getattr(self, n)) for n in LINK_CLASSES)


class ConstantAttenuation:
    """Same gamma for every link of a class, regardless of distance."""

    def __init__(self, direct: float, tx_panel: float, panel_rx: float):
        self.values = {"direct": float(direct), "tx_panel": float(tx_panel), "panel_rx": float(panel_rx)}

    def gamma(self, link_class: str, distance: float, wavelength: float) -> float:
        return self.values[link_class]

    def to_dict(self) -> dict:
        return {"model": "constant", **self.values}


class PowerLawAttenuation:
    """gamma(d) = min(c * (lambda / (4 pi d))**exponent, gamma_max).

    Without ``gamma_max`` nothing is clamped and gamma >= 1 is rejected.
    """

    def __init__(self, coefficients=None, exponent: float = 2.0, gamma_max: float | None = None):
        coefficients = coefficients or {}
        if isinstance(coefficients, (int, float)):
            coefficients = {k: coefficients for k in LINK_CLASSES}
        self.coefficients = {k: float(coefficients.get(k, 1.0)) for k in LINK_CLASSES}
        self.exponent = float(exponent)
        if gamma_max is not None and not 0 < gamma_max < 1:
            raise ConfigurationError("gamma_max must lie in (0, 1)")
        self.gamma_max = gamma_max

    def gamma(self, link_class: str, distance: float, wavelength: float) -> float:
        g = self.coefficients[link_class] * (wavelength / (4.0 * math.pi * distance)) ** self.exponent
        if self.gamma_max is not None:
            g = min(g, self.gamma_max)
        return g

    def to_dict(self) -> dict:
        return {
            "model": "power_law",
            "exponent": self.exponent,
            "gamma_max": self.gamma_max,
            **self.coefficients,
        }


def _checked_gamma(model, link_class, distance, wavelength) -> float:
    g = float(model.gamma(link_class, distance, wavelength))
    if not 0.0 < g < 1.0:
        raise ConfigurationError(
            f"attenuation for {link_class} link at distance {distance:.6g} m is {g:.6g}, "
            "outside (0, 1)"
        )
    return g


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    """Statistics of every link in a scene.

    ``tx_to_atom`` and ``atom_to_rx`` hold flat per-atom arrays ordered as in
    :class:`~blindmts.layout.AtomLayout`.
    """

    direct: RicianLink
    tx_to_atom: RicianLink
    atom_to_rx: RicianLink
    tx_power: float
    layout: AtomLayout
    scene_fingerprint: str = ""

    @property
    def n_atoms(self) -> int:
        return self.layout.n_atoms

    def direct_mean(self) -> complex:
        return complex(self.direct.mean())

    def reflected_mean(self) -> np.ndarray:
        return self.tx_to_atom.mean() * self.atom_to_rx.mean()

    def reflected_second_moment(self) -> np.ndarray:
        return self.tx_to_atom.second_moment() * self.atom_to_rx.second_moment()

    def reflected_variance(self) -> np.ndarray:
        return self.reflected_second_moment() - np.abs(self.reflected_mean()) ** 2

    def with_tx_power(self, tx_power: float) -> "ChannelEnsemble":
        return ChannelEnsemble(
            self.direct, self.tx_to_atom, self.atom_to_rx, tx_power, self.layout, self.scene_fingerprint
        )

    def without_panels(self) -> "ChannelEnsemble":
        empty = RicianLink(np.zeros(0), np.zeros(0), np.zeros(0))
        return ChannelEnsemble(self.direct, empty, empty, self.tx_power, AtomLayout((), ()))


def build_ensemble(
    scene: SceneGeometry,
    attenuation_model,
    rician_factors: RicianFactors,
    tx_power: float,
    nlos: bool = False,
    blockage: float = 1e-3,
) -> ChannelEnsemble:
    if not tx_power > 0:
        raise ConfigurationError("tx_power must be positive")
    lam = scene.wavelength
    g_direct = _checked_gamma(attenuation_model, "direct", scene.direct_distance, lam)
    if nlos:
        if not 0 < blockage < 1:
            raise ConfigurationError("blockage factor must lie in (0, 1)")
        g_direct *= blockage
    direct_phase = float(wrap_pi(scene.xi * scene.direct_distance))
    tx_g, rx_g, tx_ph, rx_ph = [], [], [], []
    for idx, panel in enumerate(scene.panels):
        d_t = link_angles(scene, idx, "tx").distance
        d_r = link_angles(scene, idx, "rx").distance
        ph = los_phases(scene, idx)
        tx_g.append(np.full(panel.n_atoms, _checked_gamma(attenuation_model, "tx_panel", d_t, lam)))
        rx_g.append(np.full(panel.n_atoms, _checked_gamma(attenuation_model, "panel_rx", d_r, lam)))
        tx_ph.append(ph.tx_to_atom.ravel())
        rx_ph.append(ph.atom_to_rx.ravel())

    def cat(parts):
        return np.concatenate(parts) if parts else np.zeros(0)

    n = scene.n_atoms
    return ChannelEnsemble(
        direct=RicianLink(g_direct, rician_factors.direct, direct_phase),
        tx_to_atom=RicianLink(cat(tx_g), np.full(n, rician_factors.tx_panel), cat(tx_ph)),
        atom_to_rx=RicianLink(cat(rx_g), np.full(n, rician_factors.panel_rx), cat(rx_ph)),
        tx_power=float(tx_power),
        layout=AtomLayout.from_scene(scene),
        scene_fingerprint=scene.fingerprint(),
    )


class ChannelRealization(NamedTuple):
    direct: complex | np.ndarray
    reflected: np.ndarray


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


def _draw_link(link: RicianLink, rng, shape):
    base = np.sqrt(link.attenuation) * link.los_weight * np.exp(1j * np.asarray(link.los_phase))
    fade = np.sqrt(link.attenuation) * link.fading_weight
    return base + fade * _cn(rng, shape)


def draw_realizations(ensemble: ChannelEnsemble, rng: np.random.Generator, size: int) -> ChannelRealization:
    """``size`` independent realizations; ``reflected`` has shape (size, n_atoms)."""
    n = ensemble.n_atoms
    direct = _draw_link(ensemble.direct, rng, (size,))
    h_t = _draw_link(ensemble.tx_to_atom, rng, (size, n))
    h_r = _draw_link(ensemble.atom_to_rx, rng, (size, n))
    return ChannelRealization(direct, h_t * h_r)


def draw_realization(ensemble: ChannelEnsemble, rng: np.random.Generator) -> ChannelRealization:
    r = draw_realizations(ensemble, rng, 1)
    return ChannelRealization(complex(r.direct[0]), r.reflected[0])


def _phasors(config: PhaseConfig | np.ndarray, layout: AtomLayout | None = None) -> np.ndarray:
    if isinstance(config, PhaseConfig):
        return np.exp(1j * config.phases())
    idx = np.asarray(config)
    return np.exp(1j * idx * layout.atom_phase_step)


def _check_dims(n_reflected: int, config: PhaseConfig) -> None:
    if config.layout.n_atoms != n_reflected:
        raise DimensionError(
            f"configuration covers {config.layout.n_atoms} atoms, channel has {n_reflected}"
        )


def instantaneous_power(realization: ChannelRealization, config: PhaseConfig, tx_power: float) -> float:
    """tx_power * |h_direct + sum_n h_n exp(j theta_n)|**2 for one realization."""
    reflected = np.asarray(realization.reflected)
    _check_dims(reflected.shape[-1], config)
    total = realization.direct + reflected @ _phasors(config)
    return float(tx_power * np.abs(total) ** 2)


def expected_snr(ensemble: ChannelEnsemble, config: PhaseConfig) -> float:
    """Closed-form SNR averaged over fading for a fixed configuration."""
    _check_dims(ensemble.n_atoms, config)
    coherent = ensemble.direct_mean() + ensemble.reflected_mean() @ _phasors(config)
    spread = float(ensemble.direct.variance()) + float(np.sum(ensemble.reflected_variance()))
    return float(ensemble.tx_power * (abs(coherent) ** 2 + spread))


def mean_rss(ensemble: ChannelEnsemble) -> float:
    """E[S] when every phase index is uniform and independent.

    Uniform K-ary phases have zero-mean phasors, so only second moments remain.
    """
    return float(
        ensemble.tx_power
        * (float(ensemble.direct.second_moment()) + float(np.sum(ensemble.reflected_second_moment())))
    )


def measure_rss(
    realization: ChannelRealization,
    config: PhaseConfig,
    tx_power: float,
    meas_noise_sigma: float,
    rng: np.random.Generator,
) -> float:
    if meas_noise_sigma < 0:
        raise ValueError("meas_noise_sigma must be non-negative")
    s = instantaneous_power(realization, config, tx_power)
    if meas_noise_sigma == 0:
        return s
    return max(0.0, s + meas_noise_sigma * float(rng.standard_normal()))


def measure_rss_batch(
    ensemble: ChannelEnsemble,
    indices: np.ndarray,
    meas_noise_sigma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """RSS for each row of ``indices`` (shape (T, n_atoms)), fresh fading per row."""
    indices = np.asarray(indices)
    t = indices.shape[0]
    if indices.ndim != 2 or indices.shape[1] != ensemble.n_atoms:
        raise DimensionError(f"indices shape {indices.shape} does not match {ensemble.n_atoms} atoms")
    real = draw_realizations(ensemble, rng, t)
    total = real.direct + np.einsum("tn,tn->t", real.reflected, _phasors(indices, ensemble.layout))
    s = ensemble.tx_power * np.abs(total) ** 2
    if meas_noise_sigma < 0:
        raise ValueError("meas_noise_sigma must be non-negative")
    if meas_noise_sigma > 0:
        s = np.maximum(0.0, s + meas_noise_sigma * rng.standard_normal(t))
    return s
