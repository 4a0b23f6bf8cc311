"""Photometric curves: luminaire radiation (LDC) and sensor sensitivity (LSC).

A curve is an azimuthally symmetric table of (angle-from-normal, value)
samples over [0, 90] degrees, peak-normalized on load, and evaluated by
linear interpolation. The same representation serves both kinds; only the
consumer differs (LDC weights emitted rays, LSC weights a sensor's incident
rays).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .sampling import DirectionSet

KINDS = ("LDC", "LSC")


@dataclass(frozen=True)
class PhotometricCurve:
    kind: str
    angles_deg: np.ndarray  # strictly increasing, first sample at 0
    values: np.ndarray  # >= 0, max value 1 after normalization

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"curve kind must be one of {KINDS}, got {self.kind!r}")

    @classmethod
    def from_samples(
        cls, kind: str, samples: list[tuple[float, float]], normalize: bool = True
    ) -> "PhotometricCurve":
        angles = np.asarray([a for a, _ in samples], dtype=float)
        values = np.asarray([v for _, v in samples], dtype=float)
        if angles.size < 2:
            raise FormatError("curve needs at least 2 samples")
        if angles[0] != 0.0:
            raise FormatError(f"first curve angle must be 0, got {angles[0]}")
        if np.any(np.diff(angles) <= 0):
            raise FormatError("curve angles must be strictly increasing")
        if angles[-1] > 90.0:
            raise FormatError(f"curve angles must lie in [0, 90], got {angles[-1]}")
        if np.any(values < 0):
            raise FormatError("curve values must be non-negative")
        peak = values.max()
        if normalize:
            if peak <= 0.0:
                raise FormatError("curve is identically zero; cannot peak-normalize")
            values = values / peak
        angles.setflags(write=False)
        values.setflags(write=False)
        return cls(kind=kind, angles_deg=angles, values=values)

    def weight_at(self, angle_deg):
        """Linear interpolation; exact at the sample angles.

        Accepts a scalar or an ndarray of angles in [0, 90].
        """
        a = np.asarray(angle_deg, dtype=float)
        if np.any(a < 0.0) or np.any(a > 90.0):
            raise ValueError("angle must lie in [0, 90] degrees")
        w = np.interp(a, self.angles_deg, self.values)
        if np.ndim(angle_deg) == 0:
            return float(w)
        return w

    def weight_rays(self, dset: DirectionSet) -> np.ndarray:
        """Per-ray weight at each ray's angle from the local normal."""
        dz = np.clip(dset.directions[:, 2], -1.0, 1.0)
        return self.weight_at(np.degrees(np.arccos(dz)))


def flat_curve(kind: str) -> PhotometricCurve:
    """Isotropic curve: weight 1 at every angle."""
    return PhotometricCurve.from_samples(kind, [(0.0, 1.0), (90.0, 1.0)])


def load_curve(path: str | Path, kind: str) -> PhotometricCurve:
    """Parse a `angle_deg,value` CSV (header row optional) into a curve."""
    path = Path(path)
    samples: list[tuple[float, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise FormatError("expected 2 comma-separated fields", str(path), lineno)
            try:
                angle, value = float(parts[0]), float(parts[1])
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise FormatError(f"could not parse row {parts!r}", str(path), lineno)
            if angle < 0.0 or angle > 90.0:
                raise FormatError(f"angle {angle} outside [0, 90]", str(path), lineno)
            if value < 0.0:
                raise FormatError(f"negative value {value}", str(path), lineno)
            if samples and angle <= samples[-1][0]:
                raise FormatError(
                    f"angles must be strictly increasing ({samples[-1][0]} then {angle})",
                    str(path),
                    lineno,
                )
            samples.append((angle, value))
    try:
        return PhotometricCurve.from_samples(kind, samples)
    except FormatError as exc:
        raise FormatError(str(exc), str(path)) from None
