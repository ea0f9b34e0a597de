"""Six-channel IMU gait signals: denoising, cycle detection and segmentation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "CHANNELS",
    "DEFAULT_CYCLE",
    "GaitSignal",
    "NoDominantPeriodError",
    "SegmentationError",
    "SegmentedSignal",
    "denoise",
    "dominant_cycle",
    "read_csv",
    "segment",
    "universal_threshold",
]

CHANNELS = 6
DEFAULT_CYCLE = 100
CSV_HEADER = ("ax", "ay", "az", "gx", "gy", "gz")


class NoDominantPeriodError(ValueError):
    pass


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GaitSignal:
    """Channels 0-2 are acceleration, 3-5 gyroscope; shape ``(6, L)``."""

    channels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.channels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != CHANNELS:
            raise ValueError(f"expected a ({CHANNELS}, L) array, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValueError("signal must have at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal contains non-finite samples")
        arr.setflags(write=False)
        object.__setattr__(self, "channels", arr)

    @property
    def length(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True, eq=False)
class SegmentedSignal:
    """Windows of shape ``(6, l, T)``."""

    windows: np.ndarray
    cycle: int

    @property
    def count(self) -> int:
        return self.windows.shape[1]


def read_csv(path: Union[str, Path]) -> GaitSignal:
    """Load ``ax,ay,az,gx,gy,gz`` rows; the header row is optional."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != CHANNELS:
                raise ValueError(f"row {i + 1}: expected {CHANNELS} columns, got {len(row)}")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                if i == 0 and not rows:
                    continue
                raise ValueError(f"row {i + 1}: non-numeric value") from None
    if not rows:
        raise ValueError(f"{path}: no samples")
    return GaitSignal(np.asarray(rows).T)


def write_csv(signal: GaitSignal, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(signal.channels.T.tolist())


def universal_threshold(detail: np.ndarray, length: int) -> float:
    """``median(|d|) / 0.6745 * sqrt(2 ln L)``."""
    if detail.size == 0 or length < 2:
        return 0.0
    sigma = np.median(np.abs(detail)) / 0.6745
    return float(sigma * math.sqrt(2.0 * math.log(length)))


def _haar_denoise(x: np.ndarray, threshold) -> np.ndarray:
    even = x[0 : x.size - x.size % 2 : 2]
    odd = x[1 : x.size - x.size % 2 : 2]
    approx = (even + odd) / math.sqrt(2.0)
    detail = (even - odd) / math.sqrt(2.0)
    thr = universal_threshold(detail, x.size) if threshold == "universal" else float(threshold)
    detail = np.sign(detail) * np.maximum(np.abs(detail) - thr, 0.0)
    out = x.copy()
    out[0 : 2 * even.size : 2] = (approx + detail) / math.sqrt(2.0)
    out[1 : 2 * even.size : 2] = (approx - detail) / math.sqrt(2.0)
    # an odd trailing sample has no Haar partner and passes through
    return out


def denoise(signal: GaitSignal, threshold: Union[str, float] = "universal") -> GaitSignal:
    """Single-level Haar wavelet denoising with soft-thresholded details.

    ``threshold`` is ``"universal"`` (per channel) or a fixed non-negative value.
    """
    if signal.length < 2:
        raise ValueError("denoising needs at least 2 samples")
    if threshold != "universal":
        threshold = float(threshold)
        if threshold < 0 or not math.isfinite(threshold):
            raise ValueError("fixed threshold must be finite and non-negative")
    return GaitSignal(np.stack([_haar_denoise(ch, threshold) for ch in signal.channels]))


def dominant_cycle(channel) -> int:
    """Period (in samples) of the strongest non-DC DFT component.

    Ties go to the lower frequency. Returns ``round(L / k*)``.
    """
    x = np.asarray(channel, dtype=np.float64).reshape(-1)
    if x.size < 4:
        raise ValueError("need at least 4 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("channel contains non-finite samples")
    magnitude = np.abs(np.fft.rfft(x))[1:]
    peak = float(magnitude.max())
    # spectral leakage of a constant is pure rounding noise
    if peak <= 1e-9 * (np.abs(x).sum() + 1e-300) or np.ptp(x) == 0:
        raise NoDominantPeriodError("channel has no non-DC spectral content")
    k = int(np.argmax(magnitude)) + 1
    return int(math.floor(x.size / k + 0.5))


def segment(signal: GaitSignal, cycle: int = DEFAULT_CYCLE) -> SegmentedSignal:
    """Split each channel into ``floor(L / cycle)`` windows; the tail is dropped."""
    cycle = int(cycle)
    if cycle < 1:
        raise ValueError("cycle must be positive")
    if cycle > signal.length:
        raise SegmentationError(f"cycle {cycle} exceeds signal length {signal.length}")
    count = signal.length // cycle
    windows = signal.channels[:, : count * cycle].reshape(CHANNELS, count, cycle).copy()
    windows.setflags(write=False)
    return SegmentedSignal(windows, cycle)
