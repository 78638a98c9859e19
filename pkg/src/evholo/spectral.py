"""Real-input 2D spectra and dominant-frequency estimation.

`rfft2` / `irfft2` wrap the standard FFT with the shape bookkeeping this
package relies on (half-spectrum column count = cols // 2 + 1, and the
inverse always told the true column count so odd widths round-trip).
`dft2_oracle` is an independent direct evaluation of the same transform,
kept deliberately slow and size-capped; it exists so the fast path can be
checked against something that shares no code with it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BadBin, NonFinite, ShapeMismatch, TooLarge, TooShort
from .events import EventStream

#: dft2_oracle refuses inputs with more elements than this.
ORACLE_MAX_ELEMENTS = 4096

#: dominant_frequency needs at least this many rate bins.
MIN_SPECTRUM_BINS = 4

#: Peaks below this post-window magnitude are reported as "no dominant tone".
FLAT_SPECTRUM_FLOOR = 1e-9


def half_cols(cols: int) -> int:
    """Number of retained columns in a real-input half spectrum."""
    return cols // 2 + 1


def _as_real_2d(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ShapeMismatch(f"expected a non-empty 2D real array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFinite("input contains NaN or Inf")
    return a


def rfft2(x) -> np.ndarray:
    """Half-spectrum 2D DFT of a real array: shape (rows, cols // 2 + 1)."""
    return np.fft.rfft2(_as_real_2d(x))


def irfft2(z, cols: int) -> np.ndarray:
    """Invert a half spectrum back to a real (rows, cols) array.

    `cols` is the true width of the original array; it cannot be inferred
    from the half spectrum when the width parity is unknown.
    """
    a = np.asarray(z, dtype=np.complex128)
    if a.ndim != 2 or a.size == 0:
        raise ShapeMismatch(f"expected a non-empty 2D half spectrum, got shape {a.shape}")
    if a.shape[1] != half_cols(cols):
        raise ShapeMismatch(
            f"half spectrum has {a.shape[1]} columns, expected {half_cols(cols)} for cols={cols}"
        )
    if not np.isfinite(a).all():
        raise NonFinite("input contains NaN or Inf")
    return np.fft.irfft2(a, s=(a.shape[0], cols))


def dft2_oracle(x) -> np.ndarray:
    """Direct double-sum DFT, truncated to the half spectrum.

    X[k1, k2] = sum_{n1, n2} x[n1, n2] * exp(-2j*pi*(k1*n1/R + k2*n2/C))
    for k2 = 0 .. C // 2. Quadratic cost, so inputs are capped at
    ORACLE_MAX_ELEMENTS elements.
    """
    a = _as_real_2d(x)
    rows, cols = a.shape
    if a.size > ORACLE_MAX_ELEMENTS:
        raise TooLarge(
            f"oracle input has {a.size} elements, cap is {ORACLE_MAX_ELEMENTS}"
        )
    n1 = np.arange(rows)[:, None]
    n2 = np.arange(cols)[None, :]
    out = np.empty((rows, half_cols(cols)), dtype=np.complex128)
    for k1 in range(rows):
        for k2 in range(half_cols(cols)):
            phase = -2j * np.pi * (k1 * n1 / rows + k2 * n2 / cols)
            out[k1, k2] = (a * np.exp(phase)).sum()
    return out


@dataclass(frozen=True)
class RateSeries:
    """Event counts per fixed-width time bin."""

    bin_dt: float
    values: np.ndarray

    def __post_init__(self):
        if not self.bin_dt > 0:
            raise BadBin(f"bin_dt must be > 0, got {self.bin_dt}")
        v = np.asarray(self.values, dtype=np.int64)
        if v.ndim != 1:
            raise ShapeMismatch(f"values must be 1D, got shape {v.shape}")
        if v.size and v.min() < 0:
            raise ValueError("rate series values must be non-negative")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def times(self) -> np.ndarray:
        """Left edge of each bin, in seconds."""
        return np.arange(len(self.values)) * self.bin_dt


@dataclass(frozen=True)
class Spectrum:
    """Magnitude spectrum with uniform frequency resolution df (Hz/bin)."""

    df: float
    magnitudes: np.ndarray

    def __post_init__(self):
        if not self.df > 0:
            raise BadBin(f"df must be > 0, got {self.df}")
        object.__setattr__(
            self, "magnitudes", np.asarray(self.magnitudes, dtype=np.float64)
        )

    def frequencies(self) -> np.ndarray:
        return np.arange(len(self.magnitudes)) * self.df


class DominantFrequency(NamedTuple):
    f_peak: float
    magnitude: float


def event_rate_series(stream: EventStream, bin_dt: float) -> RateSeries:
    """Histogram a stream's timestamps into bins of bin_dt seconds.

    Bin index is floor(t_seconds / bin_dt); the final event (exactly at the
    duration boundary) is clamped into the last bin so the series always
    sums to the event count. Empty streams give a single zero bin.
    """
    if not bin_dt > 0:
        raise BadBin(f"bin_dt must be > 0, got {bin_dt}")
    if len(stream) == 0:
        return RateSeries(bin_dt=bin_dt, values=np.zeros(1, dtype=np.int64))
    t_s = stream.events["t"].astype(np.float64) / 1e6
    duration_s = stream.duration / 1e6
    n = max(1, int(np.ceil(duration_s / bin_dt)))
    idx = np.floor(t_s / bin_dt).astype(np.int64)
    np.clip(idx, 0, n - 1, out=idx)
    return RateSeries(bin_dt=bin_dt, values=np.bincount(idx, minlength=n))


def rate_spectrum(series: RateSeries) -> Spectrum:
    """Hann-windowed magnitude spectrum of the mean-subtracted rate series."""
    n = len(series)
    if n < MIN_SPECTRUM_BINS:
        raise TooShort(f"need at least {MIN_SPECTRUM_BINS} bins, got {n}")
    x = series.values.astype(np.float64)
    x -= x.mean()
    mags = np.abs(np.fft.rfft(x * np.hanning(n)))
    return Spectrum(df=1.0 / (series.bin_dt * n), magnitudes=mags)


def dominant_frequency(series: RateSeries) -> DominantFrequency | None:
    """Strongest positive-frequency tone in a rate series, or None if flat.

    The peak bin is refined by parabolic interpolation on the magnitude
    triple around it: delta = (alpha - gamma) / (2 * (alpha - 2*beta + gamma)),
    clamped to [-1/2, 1/2]. Bins at the spectrum edge are not refined.
    """
    spec = rate_spectrum(series)
    m = spec.magnitudes
    k = 1 + int(np.argmax(m[1:]))
    beta = m[k]
    if beta < FLAT_SPECTRUM_FLOOR:
        return None
    delta = 0.0
    mag = float(beta)
    if 1 <= k < len(m) - 1:
        alpha, gamma = m[k - 1], m[k + 1]
        denom = alpha - 2.0 * beta + gamma
        if denom != 0.0:
            delta = float(np.clip((alpha - gamma) / (2.0 * denom), -0.5, 0.5))
            mag = float(beta - 0.25 * (alpha - gamma) * delta)
    return DominantFrequency(f_peak=(k + delta) * spec.df, magnitude=mag)
