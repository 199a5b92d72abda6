"""Angle embedding of features, basis encoding of IDs, and data-restriction profiles."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable

from .errors import EncodingError

__all__ = [
    "FeatureVector", "AnglePair", "Profile", "Violation",
    "FeatureOutOfRange", "IdOverflow", "ProfileFormatError",
    "angle_embed", "state_amplitudes", "basis_encode", "basis_decode",
    "required_id_width", "validate",
]


class FeatureOutOfRange(EncodingError):
    def __init__(self, value: float, low: float, high: float):
        self.value, self.low, self.high = value, low, high
        super().__init__(f"feature {value!r} outside [{low}, {high}]")


class IdOverflow(EncodingError):
    def __init__(self, id: int, width: int):
        self.id, self.width = id, width
        super().__init__(f"id {id} does not fit in {width} bit(s)")


class ProfileFormatError(EncodingError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    f1: float
    f2: float


@dataclass(frozen=True)
class AnglePair:
    theta: float
    phi: float

    def __post_init__(self):
        for name in ("theta", "phi"):
            v = getattr(self, name)
            if not 0.0 <= v <= math.pi:
                raise EncodingError(f"{name}={v!r} outside [0, pi]")


def angle_embed(features: FeatureVector) -> AnglePair:
    """Map each feature in [-1, 1] affinely onto [0, pi]."""
    for v in (features.f1, features.f2):
        if not -1.0 <= v <= 1.0:
            raise FeatureOutOfRange(v, -1.0, 1.0)
    return AnglePair((features.f1 + 1) * math.pi / 2, (features.f2 + 1) * math.pi / 2)


def state_amplitudes(angles: AnglePair) -> tuple[complex, complex]:
    """Amplitudes of U3(theta, phi, 0)|0>."""
    return (
        complex(math.cos(angles.theta / 2)),
        cmath.exp(1j * angles.phi) * math.sin(angles.theta / 2),
    )


def basis_encode(id: int, width: int) -> list[int]:
    """Binary digits of ``id``, most significant first."""
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    if id < 0 or id >= 1 << width:
        raise IdOverflow(id, width)
    return [(id >> (width - 1 - j)) & 1 for j in range(width)]


def basis_decode(bits: Iterable[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def required_id_width(max_id: int) -> int:
    return max(1, int(max_id).bit_length())


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class Profile:
    """Data restrictions applied before anything reaches a quantum backend.

    ``max_points=0`` is allowed and means no data point may take the quantum
    route. ``id_bit_width=None`` derives the width from the largest ID.
    """

    max_points: int = 16
    feature_min: float = -1.0
    feature_max: float = 1.0
    id_bit_width: int | None = None
    shots: int = 1000
    auto_regenerate: bool = False

    def __post_init__(self):
        if self.max_points < 0:
            raise ProfileFormatError(f"max_points must be >= 0, got {self.max_points}")
        if not self.feature_min < self.feature_max:
            raise ProfileFormatError(f"feature_min {self.feature_min} must be < feature_max {self.feature_max}")
        if self.feature_min < -1.0 or self.feature_max > 1.0:
            raise ProfileFormatError("feature range must lie within [-1, 1] for angle embedding")
        if self.id_bit_width is not None and self.id_bit_width < 1:
            raise ProfileFormatError(f"id_bit_width must be >= 1, got {self.id_bit_width}")
        if self.shots < 1:
            raise ProfileFormatError(f"shots must be >= 1, got {self.shots}")

    def id_width_for(self, ids: Iterable[int]) -> int:
        if self.id_bit_width is not None:
            return self.id_bit_width
        return required_id_width(max(ids, default=0))

    @classmethod
    def from_text(cls, text: str) -> Profile:
        kinds = {f.name: f.type for f in fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (s.strip() for s in line.partition("="))
            if not sep or key not in kinds:
                raise ProfileFormatError(f"line {lineno}: expected one of {sorted(kinds)} as key=value, got {raw!r}")
            try:
                if key == "auto_regenerate":
                    values[key] = _BOOL[value.lower()]
                elif key in ("feature_min", "feature_max"):
                    values[key] = float(value)
                elif key == "id_bit_width" and value.lower() in ("", "auto"):
                    values[key] = None
                else:
                    values[key] = int(value)
            except (KeyError, ValueError):
                raise ProfileFormatError(f"line {lineno}: bad value for {key}: {value!r}") from None
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> Profile:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        width = "auto" if self.id_bit_width is None else str(self.id_bit_width)
        return (
            f"max_points={self.max_points}\n"
            f"feature_min={self.feature_min!r}\n"
            f"feature_max={self.feature_max!r}\n"
            f"id_bit_width={width}\n"
            f"shots={self.shots}\n"
            f"auto_regenerate={'true' if self.auto_regenerate else 'false'}\n"
        )


@dataclass(frozen=True)
class Violation:
    kind: str  # "FeatureOutOfRange" | "IdOverflow" | "TooManyPoints"
    row_id: int | None
    value: float | int
    detail: str = ""


def validate(table, profile: Profile) -> list[Violation]:
    """Every profile violation in ``table``; an empty list means ok.

    ``table`` is any iterable of rows with ``id``, ``f1``, ``f2`` and ``role``
    attributes. Only rows with role ``point`` count toward ``max_points``.
    """
    rows = list(table)
    out: list[Violation] = []
    for row in rows:
        for v in (row.f1, row.f2):
            if not profile.feature_min <= v <= profile.feature_max:
                out.append(Violation("FeatureOutOfRange", row.id, v, f"[{profile.feature_min}, {profile.feature_max}]"))
    width = profile.id_width_for(r.id for r in rows)
    for row in rows:
        if row.id >= 1 << width:
            out.append(Violation("IdOverflow", row.id, row.id, f"width {width}"))
    n_points = sum(1 for r in rows if getattr(r, "role", "point") == "point" and not getattr(r, "cluster", None))
    if n_points > profile.max_points:
        out.append(Violation("TooManyPoints", None, n_points, f"max_points {profile.max_points}"))
    return out
