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
    RicianFactors,
    SceneGeometry,
    build_ensemble,
    collect_dataset,
    exhaustive_schedule,
    random_schedule,
)
from blindmts.errors import DimensionError, ScheduleTooLargeError
from blindmts.sampling import RssDataset, Schedule, load_dataset, save_dataset

from oracles import WAVELENGTH


def scene(shapes=((2, 2), (1, 3)), k=(4, 2)):
    panels = []
    for i, ((r, c), kk) in enumerate(zip(shapes, k)):
        y = -2.0 if i % 2 == 0 else 2.0
        panels.append(MtsPanel(i + 1, (1.0 + i, y, 1.0), math.pi / 2 if y < 0 else -math.pi / 2, r, c, 0.02, kk))
    return SceneGeometry((0.0, 0.0, 1.0), (5.0, 0.3, 1.0), tuple(panels), WAVELENGTH)


def ensemble(sc=None, delta=5.0):
    return build_ensemble(sc or scene(), ConstantAttenuation(0.3, 0.1, 0.1), RicianFactors.uniform(delta), 1.0)


def test_layout_bookkeeping():
    lay = AtomLayout.from_scene(scene())
    assert lay.n_atoms == 7
    assert lay.offsets == (0, 4, 7)
    np.testing.assert_array_equal(lay.atom_levels, [4, 4, 4, 4, 2, 2, 2])
    assert lay.atom_label(5) == (1, 1, 2)
    flat = np.arange(7)
    assert np.array_equal(lay.join(lay.split(flat)), flat)


def test_phase_config_validation():
    lay = AtomLayout(((1, 2),), (4,))
    with pytest.raises(ValueError):
        PhaseConfig(lay, [0, 4])
    with pytest.raises(DimensionError):
        PhaseConfig(lay, [0, 1, 2])
    cfg = PhaseConfig(lay, [1, 3])
    np.testing.assert_allclose(cfg.phases(), [math.pi / 2, 3 * math.pi / 2])
    assert cfg == PhaseConfig(lay, np.array([1, 3]))
    assert len({cfg, PhaseConfig(lay, [1, 3])}) == 1
    with pytest.raises(ValueError):
        cfg.indices[0] = 2


def test_random_schedule_frequency_k2():
    lay = AtomLayout(((1, 3),), (2,))
    T = 10**5
    sched = random_schedule(lay, T, 0)
    freq = (sched.indices == 1).mean(axis=0)
    assert np.all(np.abs(freq - 0.5) < 4 * math.sqrt(0.25 / T))


def test_random_schedule_deterministic_and_tiny():
    sc = scene()
    a = random_schedule(sc, 50, 9)
    b = random_schedule(sc, 50, 9)
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, random_schedule(sc, 50, 10).indices)
    one = random_schedule(sc, 1, 0)
    assert len(one) == 1 and isinstance(one[0], PhaseConfig)
    with pytest.raises(ValueError):
        random_schedule(sc, 0, 0)


def test_random_schedule_respects_per_panel_k():
    sched = random_schedule(scene(), 2000, 1)
    assert sched.indices[:, :4].max() == 3
    assert sched.indices[:, 4:].max() == 1


def test_exhaustive_examples():
    one = AtomLayout(((1, 1),), (2,))
    assert [c.indices.tolist() for c in exhaustive_schedule(one)] == [[0], [1]]
    two = AtomLayout(((1, 1), (1, 1)), (2, 2))
    assert len(exhaustive_schedule(two)) == 4
    s = exhaustive_schedule(AtomLayout(((1, 2),), (4,)))
    assert len(s) == 16
    assert len({tuple(r) for r in s.indices.tolist()}) == 16
    assert s.indices[:3].tolist() == [[0, 0], [0, 1], [0, 2]]  # lexicographic


def test_exhaustive_cap():
    with pytest.raises(ScheduleTooLargeError):
        exhaustive_schedule(AtomLayout(((4, 4),), (4,)))
    with pytest.raises(ScheduleTooLargeError):
        exhaustive_schedule(AtomLayout(((1, 3),), (2,)), cap=7)


def test_exhaustive_bin_counts():
    lay = AtomLayout(((1, 2), (1, 1)), (2, 2))
    sched = exhaustive_schedule(lay)
    ds = RssDataset(lay, sched.indices, np.ones(len(sched)))
    for counts in ds.bin_counts():
        assert np.all(counts == len(sched) // 2)


def test_constant_schedule_pure_los_gives_equal_rss():
    ens = ensemble(delta=math.inf)
    row = random_schedule(ens, 1, 3).indices
    sched = Schedule(ens.layout, np.repeat(row, 30, axis=0))
    ds = collect_dataset(ens, sched, 0.0, 1)
    assert np.all(ds.rss == ds.rss[0])


def test_dataset_mean_matches_mean_rss():
    from blindmts import mean_rss

    ens = ensemble(delta=2.0)
    T = 10**5
    ds = collect_dataset(ens, random_schedule(ens, T, 0), 0.0, 0)
    se = ds.rss.std(ddof=1) / math.sqrt(T)
    assert abs(ds.rss.mean() - mean_rss(ens)) < 4 * se


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3000), st.integers(0, 2**31))
def test_bin_counts_sum_to_T(T, seed):
    ens = ensemble()
    sched = random_schedule(ens, T, seed)
    ds = RssDataset(ens.layout, sched.indices, np.zeros(T))
    for counts in ds.bin_counts():
        assert np.all(counts.sum(axis=-1) == T)


def test_bin_counts_concentrate():
    ens = ensemble()
    T = 20000
    ds = RssDataset(ens.layout, random_schedule(ens, T, 5).indices, np.zeros(T))
    for counts, k in zip(ds.bin_counts(), ens.layout.k_levels):
        p = 1 / k
        assert np.all(np.abs(counts - T * p) < 4 * math.sqrt(T * p * (1 - p)) + 1)


def test_collection_independent_of_threads_and_chunking_is_fixed():
    ens = ensemble()
    sched = random_schedule(ens, 1000, 2)
    a = collect_dataset(ens, sched, 0.02, 7, threads=1, chunk_size=128)
    b = collect_dataset(ens, sched, 0.02, 7, threads=4, chunk_size=128)
    assert a == b
    assert a.scene_fingerprint == scene().fingerprint()
    assert a.master_seed == 7


def test_collect_rejects_mismatch():
    ens = ensemble()
    bad = Schedule(AtomLayout(((1, 2),), (2,)), np.zeros((3, 2), dtype=int))
    with pytest.raises(DimensionError):
        collect_dataset(ens, bad, 0.0, 0)


def test_dataset_validation():
    lay = AtomLayout(((1, 2),), (2,))
    with pytest.raises(DimensionError):
        RssDataset(lay, np.zeros((3, 2), int), np.zeros(2))
    with pytest.raises(ValueError):
        RssDataset(lay, np.zeros((1, 2), int), np.array([-1.0]))


@pytest.mark.parametrize("fmt,suffix", [("csv", ".csv"), ("npz", ".npz")])
def test_dataset_round_trip_bit_exact(tmp_path, fmt, suffix):
    ens = ensemble()
    ds = collect_dataset(ens, random_schedule(ens, 300, 1), 0.05, 1)
    path = save_dataset(ds, tmp_path / f"d{suffix}", fmt)
    back = load_dataset(path)
    assert back == ds
    assert back.rss.tobytes() == ds.rss.tobytes()


def test_csv_header_layout(tmp_path):
    ens = ensemble()
    ds = collect_dataset(ens, random_schedule(ens, 3, 1), 0.0, 1)
    lines = save_dataset(ds, tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "# blindmts-dataset v1"
    assert '"T": 3' in lines[1]
    assert lines[2].split(",")[0] == "p0_u1_v1" and lines[2].endswith(",S")
    assert len(lines) == 3 + 3


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_dataset(p)
