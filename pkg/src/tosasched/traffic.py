"""Periodic C&C packet streams: N distinct effective packets, each repeated k times.

One packet arrives per TTI. Packets inside a run are field-identical;
consecutive runs are guaranteed to differ in at least one field.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

# Field value ranges (min, max) for ROW, PITCH, YAW, THRUST.
FIELD_BOUNDS: dict[str, tuple[float, float]] = {
    "row_deg": (-35.0, 35.0),
    "pitch_deg": (-35.0, 35.0),
    "yaw_deg_s": (-150.0, 150.0),
    "thrust_m_s": (-5.0, 5.0),
}

_RESAMPLE_LIMIT = 100

_STREAM_HEADER = "seq_index\trun_id\trow_deg\tpitch_deg\tyaw_deg_s\tthrust_m_s\tgen_time_s"


@dataclass(frozen=True)
class CncPacket:
    """One C&C signal: four control values plus stream bookkeeping."""

    row_deg: float
    pitch_deg: float
    yaw_deg_s: float
    thrust_m_s: float
    gen_time_s: float
    seq_index: int
    run_id: int
    payload_bits: int = 128

    def __post_init__(self) -> None:
        for name, (lo, hi) in FIELD_BOUNDS.items():
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    def fields(self) -> tuple[float, float, float, float]:
        return (self.row_deg, self.pitch_deg, self.yaw_deg_s, self.thrust_m_s)

    def same_fields(self, other: "CncPacket") -> bool:
        return self.fields() == other.fields()


@dataclass(frozen=True)
class DatasetConfig:
    """Stream shape: N effective packets, each repeated k times.

    field_ranges narrows the uniform sampling interval per field (it
    must stay inside the nominal bounds). explicit_fields bypasses
    sampling entirely with one (row, pitch, yaw, thrust) tuple per
    effective packet.
    """

    n_effective: int
    repeat_k: int
    payload_bits: int = 128
    field_ranges: Mapping[str, tuple[float, float]] | None = None
    explicit_fields: Sequence[tuple[float, float, float, float]] | None = None

    def __post_init__(self) -> None:
        if self.n_effective < 1:
            raise ValueError("n_effective must be >= 1")
        if self.repeat_k < 1:
            raise ValueError("repeat_k must be >= 1")
        if self.payload_bits <= 0:
            raise ValueError("payload_bits must be > 0")
        if self.field_ranges is not None:
            for name, (lo, hi) in self.field_ranges.items():
                if name not in FIELD_BOUNDS:
                    raise ValueError(f"unknown field {name!r}")
                blo, bhi = FIELD_BOUNDS[name]
                if not (blo <= lo <= hi <= bhi):
                    raise ValueError(f"range for {name} must lie inside [{blo}, {bhi}]")
        if self.explicit_fields is not None:
            if len(self.explicit_fields) != self.n_effective:
                raise ValueError("explicit_fields must list one tuple per effective packet")
            for prev, curr in zip(self.explicit_fields, self.explicit_fields[1:]):
                if tuple(prev) == tuple(curr):
                    raise ValueError("consecutive effective packets must differ in at least one field")

    @property
    def stream_length(self) -> int:
        return self.n_effective * self.repeat_k

    def sampling_bounds(self) -> dict[str, tuple[float, float]]:
        bounds = dict(FIELD_BOUNDS)
        if self.field_ranges is not None:
            bounds.update(self.field_ranges)
        return bounds


def random_effective_packet(
    rng: np.random.Generator,
    field_ranges: Mapping[str, tuple[float, float]] | None = None,
) -> tuple[float, float, float, float]:
    """Draw one (row, pitch, yaw, thrust) tuple uniformly within the field ranges."""
    bounds = dict(FIELD_BOUNDS)
    if field_ranges is not None:
        bounds.update(field_ranges)
    return tuple(float(rng.uniform(lo, hi)) for lo, hi in (bounds[n] for n in FIELD_BOUNDS))


def build_stream(
    cfg: DatasetConfig,
    rng: np.random.Generator,
    tti_seconds: float = 1.0e-3,
) -> list[CncPacket]:
    """Generate the k*N packet stream on the TTI grid.

    Consecutive effective packets are resampled until they differ, so
    every run boundary is a real content change.
    """
    if tti_seconds <= 0:
        raise ValueError("tti_seconds must be > 0")
    if cfg.explicit_fields is not None:
        effective = [tuple(f) for f in cfg.explicit_fields]
    else:
        bounds = cfg.sampling_bounds()
        effective = []
        for _ in range(cfg.n_effective):
            fields = random_effective_packet(rng, bounds)
            attempts = 0
            while effective and fields == effective[-1]:
                attempts += 1
                if attempts > _RESAMPLE_LIMIT:
                    raise ValueError("field ranges are degenerate: cannot draw distinct consecutive packets")
                fields = random_effective_packet(rng, bounds)
            effective.append(fields)

    stream: list[CncPacket] = []
    seq = 0
    for run_id, fields in enumerate(effective):
        for _ in range(cfg.repeat_k):
            stream.append(
                CncPacket(
                    row_deg=fields[0],
                    pitch_deg=fields[1],
                    yaw_deg_s=fields[2],
                    thrust_m_s=fields[3],
                    gen_time_s=seq * tti_seconds,
                    seq_index=seq,
                    run_id=run_id,
                    payload_bits=cfg.payload_bits,
                )
            )
            seq += 1
    return stream


def save_stream(stream: Sequence[CncPacket], path: str | Path) -> None:
    """Write a stream as a tab-separated table, one packet per line.

    Floats are written with repr so that a load round-trips the exact
    values and replays are byte-identical.
    """
    lines = [_STREAM_HEADER]
    for p in stream:
        values = (p.row_deg, p.pitch_deg, p.yaw_deg_s, p.thrust_m_s, p.gen_time_s)
        lines.append("\t".join([str(p.seq_index), str(p.run_id)] + [repr(float(v)) for v in values]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_stream(path: str | Path, payload_bits: int = 128) -> list[CncPacket]:
    """Read a stream written by save_stream."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _STREAM_HEADER:
        raise ValueError(f"{path}: not a packet stream table")
    stream = []
    for line in lines[1:]:
        seq, run, row, pitch, yaw, thrust, gen = line.split("\t")
        stream.append(
            CncPacket(
                row_deg=float(row),
                pitch_deg=float(pitch),
                yaw_deg_s=float(yaw),
                thrust_m_s=float(thrust),
                gen_time_s=float(gen),
                seq_index=int(seq),
                run_id=int(run),
                payload_bits=payload_bits,
            )
        )
    return stream
