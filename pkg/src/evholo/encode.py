"""Encoders from event streams to dense spatiotemporal tensors.

The primary encoding is a 3-channel time-height tensor: per-polarity event
density maps plus a holographic map that folds the horizontal coordinate in
through the transverse embedding phi(x) = sin(pi * x / W). Single-plane
2-channel density projections (HW, TW, TH) are provided for comparison.

Binning rules (shared by all encoders):

    temporal bin = floor((t - t_min) * t_bins / (duration + 1))
    height bin   = floor(y * h_bins / H_sensor)
    width bin    = floor(x * w_bins / W_sensor)

For normalized streams t_min is 0 and the temporal rule reduces to
floor(t * t_bins / (duration + 1)); subtracting t_min makes encoding
shift-invariant for sub-streams extracted from a larger one. The +1 on
duration lets the final event land in the last bin without a special
case. Out-of-geometry events are dropped and counted, never clamped.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import ChannelOutOfRange, ConfigInvalid
from .events import EventStream

NormalizeMode = Literal["none", "per_channel_max", "log1p"]
ViewKind = Literal["hw", "tw", "th"]

_NORMALIZE_MODES = ("none", "per_channel_max", "log1p")
_VIEW_KINDS = ("hw", "tw", "th")


def phi(x, w_sensor: int):
    """Transverse spatial embedding sin(pi * x / w_sensor).

    Accepts scalars or arrays; 0 at the left sensor edge, 1 at midwidth,
    symmetric about it.
    """
    return np.sin(np.pi * np.asarray(x, dtype=np.float64) / w_sensor)


@dataclass(frozen=True)
class EncodeConfig:
    """Binning and normalization settings.

    h_bins / w_bins of None resolve to the sensor extents at encode time.
    """

    t_bins: int = 224
    h_bins: int | None = None
    w_bins: int | None = None
    normalize: NormalizeMode = "none"

    def __post_init__(self):
        for name, value in (("t_bins", self.t_bins), ("h_bins", self.h_bins),
                            ("w_bins", self.w_bins)):
            if value is not None and value < 1:
                raise ConfigInvalid(f"{name} must be >= 1, got {value}")
        if self.normalize not in _NORMALIZE_MODES:
            raise ConfigInvalid(
                f"normalize must be one of {_NORMALIZE_MODES}, got {self.normalize!r}"
            )

    def resolved(self, geometry: tuple[int, int]) -> "EncodeConfig":
        """Replace None bin counts with the sensor extents."""
        w, h = geometry
        return replace(
            self,
            h_bins=self.h_bins if self.h_bins is not None else h,
            w_bins=self.w_bins if self.w_bins is not None else w,
        )


@dataclass(frozen=True)
class ChsrTensor:
    """3 x t_bins x h_bins tensor (positive density, negative density,
    holographic map), the count of dropped out-of-geometry events, and the
    resolved config it was produced with."""

    data: np.ndarray
    dropped: int
    config: EncodeConfig


@dataclass(frozen=True)
class ViewTensor:
    """2-channel (positive, negative) density projection onto one plane."""

    view: ViewKind
    data: np.ndarray
    dropped: int
    config: EncodeConfig


def _normalize(data: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return data
    if mode == "per_channel_max":
        out = data.copy()
        for ch in out:
            m = np.abs(ch).max()
            if m > 0:
                ch /= m
        return out
    # log1p: channels are non-negative counts / phi sums
    return np.log1p(data)


def _plane_histograms(ev, geometry, rows_of, row_bins, cols_of, col_bins,
                      t_min, duration, with_phi):
    """Accumulate one event chunk into (pos, neg[, phi]) plane histograms."""
    w, h = geometry
    x, y, t, p = ev["x"], ev["y"], ev["t"], ev["p"]
    inb = (x >= 0) & (x < w) & (y >= 0) & (y < h)
    dropped = int(len(ev) - inb.sum())
    if dropped:
        x, y, t, p = x[inb], y[inb], t[inb], p[inb]

    def axis_bin(which, bins):
        if which == "t":
            return ((t - t_min) * bins) // (duration + 1)
        if which == "y":
            return (y * bins) // h
        return (x * bins) // w

    flat = axis_bin(rows_of, row_bins) * col_bins + axis_bin(cols_of, col_bins)
    size = row_bins * col_bins
    pos = np.bincount(flat[p == 1], minlength=size)
    neg = np.bincount(flat[p == -1], minlength=size)
    planes = [pos, neg]
    if with_phi:
        planes.append(np.bincount(flat, weights=phi(x, w), minlength=size))
    return planes, dropped


def _accumulate(stream, rows_of, row_bins, cols_of, col_bins, with_phi,
                workers):
    """Chunk the stream across workers and reduce partials in worker order.

    Integer planes are bit-identical for any worker count; the phi plane is
    bit-identical for a fixed worker count and within relative 1e-9 across
    counts (float accumulation order).
    """
    duration = stream.duration
    t_min = int(stream.events["t"].min()) if len(stream.events) else 0
    shape = (row_bins, col_bins)

    def chunk_job(chunk):
        return _plane_histograms(chunk, stream.geometry, rows_of, row_bins,
                                 cols_of, col_bins, t_min, duration, with_phi)

    chunks = np.array_split(stream.events, max(1, workers))
    if workers <= 1 or len(stream.events) == 0:
        results = [chunk_job(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(chunk_job, chunks))

    n_planes = 3 if with_phi else 2
    totals = [np.zeros(row_bins * col_bins, dtype=np.float64) for _ in range(n_planes)]
    int_totals = [np.zeros(row_bins * col_bins, dtype=np.int64) for _ in range(2)]
    dropped = 0
    for planes, d in results:
        dropped += d
        int_totals[0] += planes[0]
        int_totals[1] += planes[1]
        if with_phi:
            totals[2] += planes[2]
    totals[0] = int_totals[0].astype(np.float64)
    totals[1] = int_totals[1].astype(np.float64)
    return [t.reshape(shape) for t in totals], dropped


def encode_chsr(stream: EventStream, config: EncodeConfig | None = None,
                workers: int = 1) -> ChsrTensor:
    """Encode a normalized stream into the 3-channel time-height tensor.

    Channel 0/1 count positive/negative events per (time bin, height bin)
    cell; channel 2 accumulates phi(x) over all events regardless of
    polarity. An empty stream yields the all-zero tensor with dropped = 0.
    """
    cfg = (config or EncodeConfig()).resolved(stream.geometry)
    planes, dropped = _accumulate(
        stream, "t", cfg.t_bins, "y", cfg.h_bins, True, workers
    )
    data = _normalize(np.stack(planes), cfg.normalize)
    return ChsrTensor(data=data, dropped=dropped, config=cfg)


def encode_view(stream: EventStream, view: ViewKind,
                config: EncodeConfig | None = None,
                workers: int = 1) -> ViewTensor:
    """Encode the 2-channel polarity density projection onto one plane.

    The TH view equals channels 0-1 of `encode_chsr` under the same config.
    """
    view = view.lower()
    if view not in _VIEW_KINDS:
        raise ConfigInvalid(f"view must be one of {_VIEW_KINDS}, got {view!r}")
    cfg = (config or EncodeConfig()).resolved(stream.geometry)
    axes = {
        "hw": ("y", cfg.h_bins, "x", cfg.w_bins),
        "tw": ("t", cfg.t_bins, "x", cfg.w_bins),
        "th": ("t", cfg.t_bins, "y", cfg.h_bins),
    }[view]
    planes, dropped = _accumulate(stream, *axes, False, workers)
    data = _normalize(np.stack(planes), cfg.normalize)
    return ViewTensor(view=view, data=data, dropped=dropped, config=cfg)


def export_channel_image(tensor: ChsrTensor | ViewTensor, channel: int) -> bytes:
    """Render one channel as an 8-bit binary PGM (P5), min-max normalized.

    A zero-range channel exports an all-zero image of the same dimensions.
    """
    data = tensor.data
    if not 0 <= channel < data.shape[0]:
        raise ChannelOutOfRange(
            f"channel {channel} outside 0..{data.shape[0] - 1}"
        )
    ch = data[channel]
    rows, cols = ch.shape
    lo, hi = float(ch.min()), float(ch.max())
    if hi > lo:
        img = np.rint((ch - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.zeros((rows, cols), dtype=np.uint8)
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    return header + img.tobytes()
