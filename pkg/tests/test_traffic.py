"""Stream generator tests: run structure, sampling bounds, exact round trips."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tosasched.traffic import (
    CncPacket,
    DatasetConfig,
    FIELD_BOUNDS,
    build_stream,
    load_stream,
    random_effective_packet,
    save_stream,
)


def test_worked_yaw_step_example():
    # N=3, k=4: yaw 30 -> 0 -> 30 deg/s with thrust 3 m/s, row/pitch 0.
    cfg = DatasetConfig(
        n_effective=3,
        repeat_k=4,
        explicit_fields=[(0.0, 0.0, 30.0, 3.0), (0.0, 0.0, 0.0, 3.0), (0.0, 0.0, 30.0, 3.0)],
    )
    stream = build_stream(cfg, np.random.default_rng(0), tti_seconds=1e-3)
    assert len(stream) == 12
    assert [p.yaw_deg_s for p in stream] == [30.0] * 4 + [0.0] * 4 + [30.0] * 4
    assert all(p.thrust_m_s == 3.0 and p.row_deg == 0.0 and p.pitch_deg == 0.0 for p in stream)
    assert [p.run_id for p in stream] == [0] * 4 + [1] * 4 + [2] * 4
    assert [p.seq_index for p in stream] == list(range(12))


def test_single_repeat_stream():
    cfg = DatasetConfig(n_effective=5, repeat_k=1)
    stream = build_stream(cfg, np.random.default_rng(1))
    assert len(stream) == 5
    assert [p.run_id for p in stream] == list(range(5))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 50), k=st.integers(1, 20), seed=st.integers(0, 2**31))
def test_run_structure_over_grid(n, k, seed):
    cfg = DatasetConfig(n_effective=n, repeat_k=k)
    stream = build_stream(cfg, np.random.default_rng(seed))
    assert len(stream) == n * k
    runs: dict[int, list[CncPacket]] = {}
    for p in stream:
        runs.setdefault(p.run_id, []).append(p)
    assert sorted(runs) == list(range(n))
    for members in runs.values():
        assert len(members) == k
        assert all(m.same_fields(members[0]) for m in members)
    for a, b in zip(stream, stream[1:]):
        assert b.seq_index == a.seq_index + 1
        if b.run_id != a.run_id:
            assert not b.same_fields(a)


def test_gen_time_on_tti_grid():
    cfg = DatasetConfig(n_effective=4, repeat_k=3)
    stream = build_stream(cfg, np.random.default_rng(2), tti_seconds=2e-3)
    for j, p in enumerate(stream):
        assert p.gen_time_s == j * 2e-3


def test_random_packet_within_bounds_and_deterministic():
    fields_a = random_effective_packet(np.random.default_rng(9))
    fields_b = random_effective_packet(np.random.default_rng(9))
    assert fields_a == fields_b
    for value, (lo, hi) in zip(fields_a, FIELD_BOUNDS.values()):
        assert lo <= value <= hi


def test_random_packet_yaw_mean_near_zero():
    rng = np.random.default_rng(4)
    yaw = np.array([random_effective_packet(rng)[2] for _ in range(100_000)])
    assert abs(yaw.mean()) < 2.0


def test_field_range_narrowing():
    rng = np.random.default_rng(5)
    cfg = DatasetConfig(n_effective=50, repeat_k=1, field_ranges={"yaw_deg_s": (10.0, 20.0)})
    stream = build_stream(cfg, rng)
    assert all(10.0 <= p.yaw_deg_s <= 20.0 for p in stream)


def test_degenerate_ranges_cannot_build_distinct_runs():
    cfg = DatasetConfig(
        n_effective=2,
        repeat_k=1,
        field_ranges={name: (0.0, 0.0) for name in FIELD_BOUNDS},
    )
    with pytest.raises(ValueError, match="degenerate"):
        build_stream(cfg, np.random.default_rng(6))


def test_save_load_round_trip_exact(tmp_path):
    cfg = DatasetConfig(n_effective=7, repeat_k=3)
    stream = build_stream(cfg, np.random.default_rng(8))
    path = tmp_path / "stream.tsv"
    save_stream(stream, path)
    loaded = load_stream(path)
    assert loaded == stream
    save_stream(loaded, tmp_path / "again.tsv")
    assert (tmp_path / "again.tsv").read_bytes() == path.read_bytes()


def test_load_rejects_other_files(tmp_path):
    path = tmp_path / "junk.tsv"
    path.write_text("nonsense\n1\t2\n")
    with pytest.raises(ValueError):
        load_stream(path)


def test_packet_field_bounds_enforced():
    with pytest.raises(ValueError):
        CncPacket(row_deg=99.0, pitch_deg=0.0, yaw_deg_s=0.0, thrust_m_s=0.0, gen_time_s=0.0, seq_index=0, run_id=0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_effective=0, repeat_k=1),
        dict(n_effective=1, repeat_k=0),
        dict(n_effective=2, repeat_k=1, explicit_fields=[(0, 0, 1, 0)]),
        dict(n_effective=2, repeat_k=1, explicit_fields=[(0, 0, 1, 0), (0, 0, 1, 0)]),
        dict(n_effective=1, repeat_k=1, field_ranges={"yaw_deg_s": (-500.0, 0.0)}),
        dict(n_effective=1, repeat_k=1, field_ranges={"bogus": (0.0, 1.0)}),
    ],
)
def test_dataset_config_validation(kwargs):
    with pytest.raises(ValueError):
        DatasetConfig(**kwargs)
