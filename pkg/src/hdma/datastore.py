"""
CSV-backed table of data points and centroids, indexed by ID.

File format (UTF-8, ``.`` decimal separator)::

    ID,Feature1,Feature2,Cluster,Role
    0,-0.5,0.5,blue,centroid
    2,0.15,-0.15,,point

The Role column is optional on input; without it a non-empty Cluster marks a
centroid. Output always carries Role.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Sequence

from .distest import Centroid, NoCentroids, Point, ProfileViolation
from .encode import FeatureVector, Profile, validate
from .errors import StoreError

__all__ = [
    "Row", "Table", "ChangeToken", "CENTROID", "POINT", "HEADER",
    "CsvSyntax", "DuplicateId", "NonNumericFeature", "UnknownId",
    "load", "loads", "dumps", "persist", "extract", "update_cluster", "change_token",
    "to_point", "to_centroid",
]

CENTROID, POINT = "centroid", "point"
HEADER = ("ID", "Feature1", "Feature2", "Cluster", "Role")


class CsvSyntax(StoreError, ValueError):
    def __init__(self, message: str, row: int):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DuplicateId(StoreError, ValueError):
    pass


class NonNumericFeature(StoreError, ValueError):
    pass


class UnknownId(StoreError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown id"


@dataclass(frozen=True)
class Row:
    id: int
    f1: float
    f2: float
    cluster: str | None = None
    role: str = POINT

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"id must be non-negative, got {self.id}")
        if self.role not in (CENTROID, POINT):
            raise ValueError(f"role must be {CENTROID!r} or {POINT!r}, got {self.role!r}")
        if self.role == CENTROID and not self.cluster:
            raise ValueError(f"centroid {self.id} needs a cluster label")
        if self.cluster == "":
            object.__setattr__(self, "cluster", None)

    @property
    def features(self) -> FeatureVector:
        return FeatureVector(self.f1, self.f2)


class Table:
    """Ordered rows plus an id -> position index. Mutators return new tables."""

    __slots__ = ("_rows", "_index")

    def __init__(self, rows: Sequence[Row] = ()):
        rows = tuple(rows)
        index: dict[int, int] = {}
        for pos, row in enumerate(rows):
            if row.id in index:
                raise DuplicateId(f"duplicate id {row.id}")
            index[row.id] = pos
        self._rows = rows
        self._index = index

    @classmethod
    def _from_parts(cls, rows: tuple[Row, ...], index: dict[int, int]) -> Table:
        t = object.__new__(cls)
        t._rows, t._index = rows, index
        return t

    @property
    def rows(self) -> tuple[Row, ...]:
        return self._rows

    @property
    def index(self) -> dict[int, int]:
        return dict(self._index)

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[Row]:
        return iter(self._rows)

    def __contains__(self, id: int) -> bool:
        return id in self._index

    def __getitem__(self, id: int) -> Row:
        try:
            return self._rows[self._index[id]]
        except KeyError:
            raise UnknownId(f"unknown id {id}") from None

    def __eq__(self, other) -> bool:
        return isinstance(other, Table) and self._rows == other._rows

    def __hash__(self):
        return hash(self._rows)

    def __repr__(self) -> str:
        return f"Table({list(self._rows)!r})"

    @property
    def centroids(self) -> list[Row]:
        return [r for r in self._rows if r.role == CENTROID]

    @property
    def unassigned(self) -> list[Row]:
        return [r for r in self._rows if r.role == POINT and not r.cluster]


def _parse_feature(value: str, name: str, row: int) -> float:
    try:
        v = float(value)
    except ValueError:
        raise NonNumericFeature(f"row {row}: {name} is not a number: {value!r}") from None
    if not math.isfinite(v):
        raise NonNumericFeature(f"row {row}: {name} must be finite, got {value!r}")
    return v


def loads(text: str) -> Table:
    reader = csv.reader(io.StringIO(text), strict=True)
    try:
        header = next(reader, None)
    except csv.Error as exc:
        raise CsvSyntax(str(exc), 1) from None
    if header is None:
        return Table()
    header = [h.strip() for h in header]
    header[0] = header[0].lstrip("\ufeff")
    has_role = tuple(header) == HEADER
    if not has_role and tuple(header) != HEADER[:4]:
        raise CsvSyntax(f"header must be {','.join(HEADER)} (Role optional), got {','.join(header)}", 1)
    width = len(header)

    rows: list[Row] = []
    seen: set[int] = set()
    line = 1
    try:
        for line, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != width:
                raise CsvSyntax(f"expected {width} fields, got {len(record)}", line)
            raw_id, f1, f2, cluster = (cell.strip() for cell in record[:4])
            if not raw_id.isdigit():
                raise CsvSyntax(f"ID must be a non-negative integer, got {raw_id!r}", line)
            id = int(raw_id)
            if id in seen:
                raise DuplicateId(f"row {line}: duplicate id {id}")
            seen.add(id)
            role = record[4].strip() if has_role else (CENTROID if cluster else POINT)
            try:
                rows.append(Row(id, _parse_feature(f1, "Feature1", line), _parse_feature(f2, "Feature2", line),
                                cluster or None, role))
            except ValueError as exc:
                if isinstance(exc, StoreError):
                    raise
                raise CsvSyntax(str(exc), line) from None
    except csv.Error as exc:
        raise CsvSyntax(str(exc), line + 1) from None
    return Table(rows)


def load(path: str | os.PathLike) -> Table:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads(fh.read())


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps(table: Table) -> str:
    """Canonical CSV text: fixed header, shortest round-trip floats, LF line ends."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in table:
        writer.writerow([r.id, _fmt(r.f1), _fmt(r.f2), r.cluster or "", r.role])
    return buf.getvalue()


def persist(table: Table, path: str | os.PathLike) -> None:
    """Write atomically; raises OSError when the destination is not writable."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(dumps(table))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def update_cluster(table: Table, id: int, label: str) -> Table:
    pos = table._index.get(id)
    if pos is None:
        raise UnknownId(f"unknown id {id}")
    rows = list(table.rows)
    rows[pos] = replace(rows[pos], cluster=label)
    return Table._from_parts(tuple(rows), table._index)


def to_point(row: Row) -> Point:
    return Point(row.id, row.features)


def to_centroid(row: Row) -> Centroid:
    return Centroid(row.id, row.features, row.cluster)


def extract(table: Table, profile: Profile) -> tuple[list[Centroid], list[Point]]:
    """Centroids and at most ``profile.max_points`` unassigned points.

    Point-count overflow is resolved by truncation; any other profile
    violation is an error.
    """
    violations = [v for v in validate(table, profile) if v.kind != "TooManyPoints"]
    if violations:
        raise ProfileViolation("; ".join(f"{v.kind}(id={v.row_id}, {v.value})" for v in violations))
    centroids = [to_centroid(r) for r in table.centroids]
    if not centroids:
        raise NoCentroids("table has no centroid rows")
    points = [to_point(r) for r in table.unassigned[: profile.max_points]]
    return centroids, points


@dataclass(frozen=True)
class ChangeToken:
    digest: str


def change_token(table: Table) -> ChangeToken:
    return ChangeToken(hashlib.sha256(dumps(table).encode("utf-8")).hexdigest())
