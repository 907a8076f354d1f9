import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindmts import (
    AtomLayout,
    ConstantAttenuation,
    MtsPanel,
    PhaseConfig,
    PowerLawAttenuation,
    RicianFactors,
    RicianLink,
    SceneGeometry,
    build_ensemble,
    draw_realization,
    expected_snr,
    instantaneous_power,
    mean_rss,
    measure_rss,
)
from blindmts.channel import ChannelEnsemble, ChannelRealization, draw_realizations, measure_rss_batch
from blindmts.errors import ConfigurationError, DimensionError

from oracles import WAVELENGTH, random_scene


def one_panel_scene(rows=2, cols=3, k=4):
    p = MtsPanel(1, (0.0, 0.0, 0.0), 0.0, rows, cols, 0.02, k)
    return SceneGeometry((3.0, 0.5, 0.2), (2.0, -1.0, -0.3), (p,), WAVELENGTH)


def toy_ensemble(n_atoms, direct=1.0 + 0j, reflected=None, delta=math.inf, tx_power=1.0):
    """Ensemble with unit-modulus LOS parts and given attenuations."""
    layout = AtomLayout(((1, n_atoms),), (4,))
    reflected = np.ones(n_atoms) if reflected is None else np.asarray(reflected)
    return ChannelEnsemble(
        direct=RicianLink(abs(direct) ** 2, delta, np.angle(direct)),
        tx_to_atom=RicianLink(np.abs(reflected) ** 2, np.full(n_atoms, delta), np.angle(reflected)),
        atom_to_rx=RicianLink(np.ones(n_atoms), np.full(n_atoms, delta), np.zeros(n_atoms)),
        tx_power=tx_power,
        layout=layout,
    )


def random_config(layout, rng):
    return PhaseConfig(layout, rng.integers(0, layout.atom_levels))


def test_pure_los_has_zero_fading():
    ens = build_ensemble(one_panel_scene(), ConstantAttenuation(0.5, 0.1, 0.2), RicianFactors.pure_los(), 1.0)
    for link in (ens.direct, ens.tx_to_atom, ens.atom_to_rx):
        assert np.all(link.fading_weight == 0.0)
        assert np.all(link.variance() == 0.0)
    assert RicianFactors.pure_los().is_pure_los
    assert not RicianFactors.uniform(10).is_pure_los


def test_free_space_gamma_of_one_rejected():
    model = PowerLawAttenuation(1.0, 2.0)
    assert model.gamma("direct", WAVELENGTH / (4 * math.pi), WAVELENGTH) == pytest.approx(1.0)
    # put the receiver exactly at d = lambda / (4 pi) from the transmitter
    p = MtsPanel(1, (0.0, 0.0, 0.0), 0.0, 1, 1, 0.02, 2)
    sc = SceneGeometry((3.0, 0.0, 0.0), (3.0 + WAVELENGTH / (4 * math.pi), 0.0, 0.0), (p,), WAVELENGTH)
    with pytest.raises(ConfigurationError):
        build_ensemble(sc, PowerLawAttenuation({"direct": 1.0, "tx_panel": 1e-3, "panel_rx": 1e-3}), RicianFactors(), 1.0)


def test_inverse_square_ratio():
    model = PowerLawAttenuation(1.0, 2.0)
    assert model.gamma("tx_panel", 3.0, WAVELENGTH) / model.gamma("tx_panel", 6.0, WAVELENGTH) == pytest.approx(4.0)


def test_gamma_max_clamps_and_is_validated():
    model = PowerLawAttenuation(1e9, 2.0, gamma_max=0.9)
    assert model.gamma("direct", 1.0, WAVELENGTH) == 0.9
    with pytest.raises(ConfigurationError):
        PowerLawAttenuation(1.0, 2.0, gamma_max=1.0)


def test_invalid_rician_factor():
    with pytest.raises(ConfigurationError):
        RicianFactors(direct=0.0)


def test_nlos_scales_direct_gamma():
    sc = one_panel_scene()
    att = ConstantAttenuation(0.5, 0.1, 0.1)
    los = build_ensemble(sc, att, RicianFactors(), 1.0)
    nlos = build_ensemble(sc, att, RicianFactors(), 1.0, nlos=True, blockage=1e-3)
    assert float(nlos.direct.attenuation) == pytest.approx(float(los.direct.attenuation) * 1e-3)


def test_ensemble_uses_geometry_phases():
    from blindmts import los_phases

    sc = one_panel_scene()
    ens = build_ensemble(sc, ConstantAttenuation(0.5, 0.1, 0.1), RicianFactors(), 1.0)
    ph = los_phases(sc, 0)
    np.testing.assert_allclose(ens.tx_to_atom.los_phase, ph.tx_to_atom.ravel())
    np.testing.assert_allclose(ens.atom_to_rx.los_phase, ph.atom_to_rx.ravel())


def test_pure_los_realization_is_deterministic():
    ens = build_ensemble(one_panel_scene(), ConstantAttenuation(0.5, 0.1, 0.2), RicianFactors(), 1.0)
    a = draw_realization(ens, np.random.default_rng(1))
    b = draw_realization(ens, np.random.default_rng(2))
    assert a.direct == b.direct
    np.testing.assert_array_equal(a.reflected, b.reflected)
    np.testing.assert_allclose(a.reflected, ens.reflected_mean())
    np.testing.assert_allclose(np.abs(a.reflected), math.sqrt(0.1 * 0.2))


def test_single_link_moments():
    gamma, delta, phase = 0.3, 2.0, 0.7
    link = RicianLink(np.array([gamma]), np.array([delta]), np.array([phase]))
    ens = ChannelEnsemble(link, link, RicianLink(np.array([0.5]), np.array([math.inf]), np.array([0.0])),
                          1.0, AtomLayout(((1, 1),), (2,)))
    n = 10**6
    h = draw_realizations(ens, np.random.default_rng(7), n).direct
    want_mean = math.sqrt(gamma) * math.sqrt(delta / (1 + delta)) * np.exp(1j * phase)
    want_var = gamma / (1 + delta)
    se = math.sqrt(want_var / n)
    assert abs(h.mean() - want_mean) < 4 * se * math.sqrt(2)
    # variance of |h - m|^2 for a circular Gaussian is want_var^2
    assert abs(np.mean(np.abs(h - want_mean) ** 2) - want_var) < 4 * want_var / math.sqrt(n)


def test_instantaneous_power_examples():
    empty = AtomLayout((), ())
    r = ChannelRealization(1.0 + 0j, np.zeros(0))
    assert instantaneous_power(r, PhaseConfig.zeros(empty), 1.0) == pytest.approx(1.0)
    n = 7
    layout = AtomLayout(((1, n),), (4,))
    r = ChannelRealization(1.0 + 0j, np.ones(n, complex))
    assert instantaneous_power(r, PhaseConfig.zeros(layout), 1.0) == pytest.approx((1 + n) ** 2)


def test_dimension_mismatch():
    ens = toy_ensemble(3)
    with pytest.raises(DimensionError):
        expected_snr(ens, PhaseConfig.zeros(AtomLayout(((1, 2),), (4,))))
    with pytest.raises(DimensionError):
        instantaneous_power(ChannelRealization(1.0, np.ones(3)), PhaseConfig.zeros(AtomLayout(((1, 2),), (4,))), 1.0)


def test_phase_periodicity():
    rng = np.random.default_rng(3)
    ens = build_ensemble(one_panel_scene(), ConstantAttenuation(0.5, 0.1, 0.2), RicianFactors.uniform(3), 2.0)
    r = draw_realization(ens, rng)
    cfg = random_config(ens.layout, rng)
    theta = cfg.phases()
    total_a = r.direct + r.reflected @ np.exp(1j * theta)
    total_b = r.direct + r.reflected @ np.exp(1j * (theta + 2 * np.pi * rng.integers(-3, 4, theta.size)))
    assert abs(total_a) ** 2 == pytest.approx(abs(total_b) ** 2, rel=1e-12)


def test_expected_snr_pure_los_equals_instantaneous():
    rng = np.random.default_rng(5)
    ens = build_ensemble(one_panel_scene(), ConstantAttenuation(0.5, 0.1, 0.2), RicianFactors(), 3.0)
    r = draw_realization(ens, rng)
    for _ in range(5):
        cfg = random_config(ens.layout, rng)
        assert expected_snr(ens, cfg) == pytest.approx(instantaneous_power(r, cfg, 3.0), rel=1e-12)


def test_expected_snr_without_panels():
    gamma, delta, p = 0.4, 5.0, 2.5
    ens = toy_ensemble(2, direct=math.sqrt(gamma), delta=delta, tx_power=p).without_panels()
    want = p * (gamma * delta / (1 + delta) + gamma / (1 + delta))
    assert expected_snr(ens, PhaseConfig.zeros(ens.layout)) == pytest.approx(want)
    assert want == pytest.approx(p * gamma)


def test_expected_snr_monte_carlo():
    ens = build_ensemble(one_panel_scene(), ConstantAttenuation(0.5, 0.1, 0.2), RicianFactors.uniform(2.0), 1.0)
    rng = np.random.default_rng(11)
    cfg = random_config(ens.layout, rng)
    real = draw_realizations(ens, rng, 10**5)
    s = np.abs(real.direct + real.reflected @ np.exp(1j * cfg.phases())) ** 2
    se = s.std(ddof=1) / math.sqrt(s.size)
    assert abs(s.mean() - expected_snr(ens, cfg)) < 4 * se


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-math.pi, math.pi))
def test_global_phase_invariance(seed, c):
    rng = np.random.default_rng(seed)
    sc = random_scene(rng, k_levels=4, n=3)
    ens = build_ensemble(sc, ConstantAttenuation(0.3, 0.2, 0.2), RicianFactors.uniform(4.0), 1.0)
    rot = ChannelEnsemble(
        RicianLink(ens.direct.attenuation, ens.direct.rician_factor, ens.direct.los_phase + c),
        RicianLink(ens.tx_to_atom.attenuation, ens.tx_to_atom.rician_factor, ens.tx_to_atom.los_phase + c),
        ens.atom_to_rx, ens.tx_power, ens.layout,
    )
    cfg = random_config(ens.layout, rng)
    assert expected_snr(rot, cfg) == pytest.approx(expected_snr(ens, cfg), rel=1e-10)
    r = draw_realization(ens, rng)
    r_rot = ChannelRealization(r.direct * np.exp(1j * c), r.reflected * np.exp(1j * c))
    assert instantaneous_power(r_rot, cfg, 1.0) == pytest.approx(instantaneous_power(r, cfg, 1.0), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_expected_snr_at_least_variance_floor(seed):
    rng = np.random.default_rng(seed)
    sc = random_scene(rng, k_levels=4, n=3)
    ens = build_ensemble(sc, ConstantAttenuation(0.3, 0.2, 0.2), RicianFactors.uniform(rng.uniform(0.5, 20)), 2.0)
    floor = ens.tx_power * (float(ens.direct.variance()) + ens.reflected_variance().sum())
    cfg = random_config(ens.layout, rng)
    assert expected_snr(ens, cfg) >= floor * (1 - 1e-12)


def test_variance_floor_reached_when_coherent_sum_cancels():
    # with delta = 3 every link mean is scaled by sqrt(3/4); two reflected
    # means of 0.75 * a each, rotated by pi, cancel the direct mean sqrt(3/4)
    a = math.sqrt(0.75) / 1.5
    ens = toy_ensemble(2, direct=1.0, reflected=[a, a], delta=3.0)
    cfg = PhaseConfig(ens.layout, [2, 2])
    floor = float(ens.direct.variance()) + ens.reflected_variance().sum()
    assert expected_snr(ens, cfg) == pytest.approx(floor, rel=1e-12)


def test_mean_rss_formula():
    ens = toy_ensemble(3, direct=0.8, reflected=[0.2, 0.3, 0.4], delta=2.0, tx_power=1.5)
    assert mean_rss(ens) == pytest.approx(1.5 * (0.64 + 0.04 + 0.09 + 0.16))


def test_measure_rss_noise_model():
    ens = build_ensemble(one_panel_scene(), ConstantAttenuation(0.5, 0.1, 0.2), RicianFactors(), 1.0)
    rng = np.random.default_rng(0)
    r = draw_realization(ens, rng)
    cfg = random_config(ens.layout, rng)
    p = instantaneous_power(r, cfg, 1.0)
    assert measure_rss(r, cfg, 1.0, 0.0, rng) == p
    assert measure_rss(r, cfg, 1.0, 0.0, np.random.default_rng(1)) == measure_rss(r, cfg, 1.0, 0.0, np.random.default_rng(2))
    sigma = 0.05
    s = np.array([measure_rss(r, cfg, 1.0, sigma, rng) for _ in range(10**5)])
    assert abs(s.mean() - p) < 4 * sigma / math.sqrt(s.size)
    with pytest.raises(ValueError):
        measure_rss(r, cfg, 1.0, -1.0, rng)


def test_measure_rss_clamps_at_zero():
    layout = AtomLayout(((1, 1),), (2,))
    r = ChannelRealization(1e-3 + 0j, np.zeros(1, complex))
    rng = np.random.default_rng(0)
    s = [measure_rss(r, PhaseConfig.zeros(layout), 1.0, 1.0, rng) for _ in range(200)]
    assert min(s) == 0.0


def test_batch_matches_scalar_path_in_pure_los():
    ens = build_ensemble(one_panel_scene(), ConstantAttenuation(0.5, 0.1, 0.2), RicianFactors(), 2.0)
    rng = np.random.default_rng(4)
    idx = rng.integers(0, 4, size=(20, ens.n_atoms))
    s = measure_rss_batch(ens, idx, 0.0, rng)
    r = draw_realization(ens, rng)
    want = [instantaneous_power(r, PhaseConfig(ens.layout, row), 2.0) for row in idx]
    np.testing.assert_allclose(s, want, rtol=1e-12)
