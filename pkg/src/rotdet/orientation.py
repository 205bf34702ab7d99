"""Quantized orientation codec: angle <-> (bin, signed offset).

The half circle [0, 180) is split into n_o bins of width 180/n_o centered at
k * 180/n_o, so bin 0 wraps around zero and covers [180 - w/2, 180) u [0, w/2).
An angle is encoded as its bin index plus a residual offset measured in units
of r_m = 90/n_o (half a bin width), giving offsets in (-1, +1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .geometry import normalize_angle


@dataclass(frozen=True)
class AngleBinning:
    """Uniform binning of [0, 180) into n_o orientation classes."""

    n_o: int = 8

    def __post_init__(self) -> None:
        if self.n_o < 2:
            raise ValueError(f"need at least 2 orientation bins, got {self.n_o}")

    @property
    def bin_width(self) -> float:
        return 180.0 / self.n_o

    @property
    def r_m(self) -> float:
        """Max residual magnitude in degrees: half a bin width."""
        return 90.0 / self.n_o

    @cached_property
    def mean_angles(self) -> tuple[float, ...]:
        return tuple(k * self.bin_width for k in range(self.n_o))


class OrientationLabel(tuple):
    """Encoded orientation: (bin index, offset in (-1, +1])."""

    __slots__ = ()

    def __new__(cls, bin_index: int, offset: float):
        return super().__new__(cls, (int(bin_index), float(offset)))

    @property
    def bin_index(self) -> int:
        return self[0]

    @property
    def offset(self) -> float:
        return self[1]


def encode_orientation(theta: float, binning: AngleBinning) -> OrientationLabel:
    """Quantize an angle to its nearest bin plus a signed residual.

    Ties exactly halfway between bin centers resolve to the lower bin with
    offset +1. The residual is measured before the wrap bin is reduced mod
    n_o, so angles just below 180 encode as bin 0 with a negative offset.
    """
    theta_n = normalize_angle(theta)
    width = binning.bin_width
    # Nearest center, halfway points going to the lower bin.
    raw_bin = math.ceil(theta_n / width - 0.5)
    residual = theta_n - raw_bin * width
    # Float rounding in the ceil argument can overshoot the bin by one at
    # exact tie angles; keep the offset inside its advertised range.
    offset = min(1.0, max(-1.0, residual / binning.r_m))
    return OrientationLabel(raw_bin % binning.n_o, offset)


def decode_orientation(label: OrientationLabel, binning: AngleBinning) -> float:
    """Invert encode_orientation back to an angle in [0, 180)."""
    bin_index, offset = label
    if not 0 <= bin_index < binning.n_o:
        raise ValueError(f"bin index {bin_index} out of range for n_o={binning.n_o}")
    if not -1.0 <= offset <= 1.0 or not math.isfinite(offset):
        raise ValueError(f"offset must lie in [-1, 1], got {offset}")
    return normalize_angle(binning.mean_angles[bin_index] + offset * binning.r_m)
