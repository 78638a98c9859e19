"""Encoder throughput measurement (in-memory; file I/O excluded)."""

from __future__ import annotations

import time

import numpy as np

from .encode import EncodeConfig, encode_chsr
from .errors import SpecInvalid
from .events import EVENT_DTYPE, EventStream


def synthetic_uniform_stream(n_events: int, geometry: tuple[int, int] = (346, 260),
                             duration_us: int = 10_000_000,
                             seed: int = 0) -> EventStream:
    """Seeded stream with exactly n_events uniform events, for benchmarking."""
    if n_events < 0:
        raise SpecInvalid(f"n_events must be >= 0, got {n_events}")
    w, h = geometry
    rng = np.random.default_rng(seed)
    ev = np.empty(n_events, dtype=EVENT_DTYPE)
    ev["x"] = rng.integers(0, w, n_events)
    ev["y"] = rng.integers(0, h, n_events)
    ev["t"] = np.sort(rng.integers(0, duration_us, n_events))
    ev["p"] = rng.choice(np.array([-1, 1], dtype=np.int64), n_events)
    return EventStream(geometry=geometry, events=ev).normalized()


def encode_throughput(stream: EventStream, repeats: int,
                      config: EncodeConfig | None = None,
                      workers: int = 1) -> dict:
    """Time encode_chsr over `repeats` runs and summarize.

    events_per_sec is derived from the mean wall time, so the two timing
    fields and the rate are mutually consistent.
    """
    if repeats < 1:
        raise SpecInvalid(f"repeats must be >= 1, got {repeats}")
    samples_ms = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        encode_chsr(stream, config, workers=workers)
        samples_ms.append((time.perf_counter() - t0) * 1e3)
    mean_ms = float(np.mean(samples_ms))
    return {
        "events": len(stream),
        "repeats": repeats,
        "encode_chsr_mean_ms": mean_ms,
        "encode_chsr_p95_ms": float(np.percentile(samples_ms, 95)),
        "events_per_sec": len(stream) / (mean_ms / 1e3) if mean_ms > 0 else 0.0,
    }
