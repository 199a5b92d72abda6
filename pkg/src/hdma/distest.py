"""
Swap-test distance estimation between data points and cluster centroids.

Qubit layout for an ID width ``w``::

    q0            ancilla, measured into c[w]
    q1            data point, U3(theta, phi, 0)
    q2            centroid,   U3(theta, phi, 0)
    q3 .. q(2+w)  point ID, most significant bit first, measured into c[w-1] .. c[0]

The ancilla reads 1 with probability 1/2 - 1/2 |<point|centroid>|^2, so a low
count of marked shots means the point is close to the centroid.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from . import qcir
from .encode import (
    AnglePair, FeatureVector, Profile, angle_embed, basis_encode, state_amplitudes,
)
from .errors import HDMAError
from .qcir import Block, QuantumCircuit
from .qsim import CountsMap

__all__ = [
    "Point", "Centroid", "PairSpec", "DistanceEstimate", "Assignment",
    "ProfileViolation", "IdMismatch", "IncompleteComparisons", "NoCentroids",
    "build_pair_circuit", "fix_id_width", "pairs_for", "overlap_sq", "p_one", "estimate",
    "assign_clusters", "classical_assign", "squared_distance",
]

ANCILLA, POINT_QUBIT, CENTROID_QUBIT, ID_OFFSET = 0, 1, 2, 3


class ProfileViolation(HDMAError, ValueError):
    pass


class IdMismatch(HDMAError):
    pass


class IncompleteComparisons(HDMAError):
    pass


class NoCentroids(HDMAError, ValueError):
    pass


@dataclass(frozen=True)
class Point:
    id: int
    features: FeatureVector


@dataclass(frozen=True)
class Centroid:
    id: int
    features: FeatureVector
    label: str


@dataclass(frozen=True)
class PairSpec:
    point: Point
    centroid: Centroid

    def __post_init__(self):
        if self.point.id == self.centroid.id:
            raise ValueError(f"point and centroid share id {self.point.id}")


@dataclass(frozen=True)
class DistanceEstimate:
    point_id: int
    centroid_id: int
    marked_count: int
    shots: int

    def __post_init__(self):
        if not 0 <= self.marked_count <= self.shots:
            raise ValueError(f"marked_count {self.marked_count} outside [0, {self.shots}]")

    @property
    def p_hat(self) -> float:
        return self.marked_count / self.shots


@dataclass(frozen=True)
class Assignment:
    point_id: int
    cluster_label: str


def pairs_for(points: Iterable[Point], centroids: Sequence[Centroid]) -> list[PairSpec]:
    """Every (point, centroid) combination, points outermost."""
    return [PairSpec(p, c) for p in points for c in centroids]


def _id_width(pair: PairSpec, profile: Profile) -> int:
    return profile.id_width_for((pair.point.id, pair.centroid.id))


def fix_id_width(profile: Profile, ids: Iterable[int]) -> Profile:
    """Pin an automatic ID width to what the whole batch needs, so every circuit shares one layout."""
    if profile.id_bit_width is not None:
        return profile
    return replace(profile, id_bit_width=profile.id_width_for(ids))


def build_pair_circuit(pair: PairSpec, profile: Profile) -> QuantumCircuit:
    width = _id_width(pair, profile)
    for node in (pair.point, pair.centroid):
        f = node.features
        for v in (f.f1, f.f2):
            if not profile.feature_min <= v <= profile.feature_max:
                raise ProfileViolation(f"id {node.id}: feature {v} outside [{profile.feature_min}, {profile.feature_max}]")
    if pair.point.id >= 1 << width:
        raise ProfileViolation(f"point id {pair.point.id} does not fit in {width} bit(s)")

    a, b = angle_embed(pair.point.features), angle_embed(pair.centroid.features)
    bits = basis_encode(pair.point.id, width)

    c = QuantumCircuit(3 + width, 1 + width, metadata={
        "point_id": str(pair.point.id), "centroid_id": str(pair.centroid.id),
    })
    c = c.append(qcir.u3(POINT_QUBIT, a.theta, a.phi, 0.0), Block.ENCODING)
    c = c.append(qcir.u3(CENTROID_QUBIT, b.theta, b.phi, 0.0), Block.ENCODING)
    for j, bit in enumerate(bits):
        if bit:
            c = c.append(qcir.x(ID_OFFSET + j), Block.ENCODING)
    c = c.extend([qcir.h(ANCILLA), qcir.cswap(ANCILLA, POINT_QUBIT, CENTROID_QUBIT), qcir.h(ANCILLA)], Block.UNITARY)
    c = c.append(qcir.measure(ANCILLA, width), Block.MEASUREMENT)
    for j in range(width):
        c = c.append(qcir.measure(ID_OFFSET + j, width - 1 - j), Block.MEASUREMENT)
    return c


def overlap_sq(a: AnglePair, b: AnglePair) -> float:
    """|<a|b>|^2 of the two single-qubit states prepared from the angles."""
    a0, a1 = state_amplitudes(a)
    b0, b1 = state_amplitudes(b)
    inner = a0.conjugate() * b0 + a1.conjugate() * b1
    return min(1.0, abs(inner) ** 2)


def p_one(a: AnglePair, b: AnglePair) -> float:
    """Probability that the swap-test ancilla reads 1."""
    return 0.5 - 0.5 * overlap_sq(a, b)


def estimate(counts: CountsMap, pair: PairSpec) -> DistanceEstimate:
    marked = 0
    expected_id = None
    for bitstring, n in counts.items():
        if expected_id is None:
            expected_id = format(pair.point.id, f"0{len(bitstring) - 1}b")
        if bitstring[1:] != expected_id:
            raise IdMismatch(
                f"outcome {bitstring!r} carries id bits {bitstring[1:]!r}, expected {expected_id!r} "
                f"for point {pair.point.id}"
            )
        if bitstring[0] == "1":
            marked += n
    return DistanceEstimate(pair.point.id, pair.centroid.id, marked, counts.shots)


def assign_clusters(estimates: Iterable[DistanceEstimate], centroids: Sequence[Centroid]) -> list[Assignment]:
    """Label each point with the centroid of fewest marked shots (smaller centroid id on ties)."""
    if not centroids:
        raise NoCentroids("no centroids to compare against")
    by_point: dict[int, dict[int, DistanceEstimate]] = {}
    for e in estimates:
        by_point.setdefault(e.point_id, {})[e.centroid_id] = e
    shots = {e.shots for per in by_point.values() for e in per.values()}
    if len(shots) > 1:
        raise ValueError(f"estimates mix shot counts {sorted(shots)}")
    ordered = sorted(centroids, key=lambda c: c.id)
    out = []
    for point_id, per in by_point.items():
        missing = [c.id for c in ordered if c.id not in per]
        if missing:
            raise IncompleteComparisons(f"point {point_id} lacks estimates for centroids {missing}")
        best = min(ordered, key=lambda c: (per[c.id].marked_count, c.id))
        out.append(Assignment(point_id, best.label))
    return out


def squared_distance(a: FeatureVector, b: FeatureVector) -> float:
    return (a.f1 - b.f1) ** 2 + (a.f2 - b.f2) ** 2


def classical_assign(points: Iterable[Point], centroids: Sequence[Centroid]) -> list[Assignment]:
    if not centroids:
        raise NoCentroids("no centroids to compare against")
    ordered = sorted(centroids, key=lambda c: c.id)
    return [
        Assignment(p.id, min(ordered, key=lambda c: (squared_distance(p.features, c.features), c.id)).label)
        for p in points
    ]
