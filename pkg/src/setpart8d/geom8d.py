"""Polarization geometry of PDM-QPSK symbols in eight dimensions.

An 8D symbol is two consecutive dual-polarization slots (T1, T2). Each slot is
a Jones vector; its state of polarization is compared through normalized
Stokes vectors. The relative orientation of the two slots puts every symbol in
one of three classes:

* PB (polarization balanced): antipodal Stokes vectors, dot product -1
* PA (polarization alternating): orthogonal Stokes vectors, dot product 0
* PI (polarization identical): same Stokes vector, dot product +1
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

CLASS_TOL = 1e-9

BitWord = tuple[int, ...]


def bitword(value: int, n: int) -> BitWord:
    """Bits of ``value`` as a length-``n`` tuple, most significant first."""
    if not 0 <= value < 1 << n:
        raise ValueError(f"{value} does not fit in {n} bits")
    return tuple((value >> (n - 1 - k)) & 1 for k in range(n))


def word_value(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"non-binary entry {b!r}")
        v = (v << 1) | int(b)
    return v


@dataclass(frozen=True)
class JonesVector:
    ex: complex
    ey: complex

    @property
    def power(self) -> float:
        return abs(self.ex) ** 2 + abs(self.ey) ** 2

    def rotated(self, u: np.ndarray) -> JonesVector:
        ex, ey = np.asarray(u) @ np.array([self.ex, self.ey])
        return JonesVector(complex(ex), complex(ey))


@dataclass(frozen=True)
class StokesVector:
    s1: float
    s2: float
    s3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])

    def dot(self, other: StokesVector) -> float:
        return float(self.as_array() @ other.as_array())


@dataclass(frozen=True)
class Symbol8D:
    t1: JonesVector
    t2: JonesVector
    label: BitWord = ()

    def vector(self) -> np.ndarray:
        """The 8 real coordinates (Re, Im of x1, y1, x2, y2)."""
        c = np.array([self.t1.ex, self.t1.ey, self.t2.ex, self.t2.ey])
        return np.column_stack([c.real, c.imag]).ravel()

    @property
    def energy(self) -> float:
        return self.t1.power + self.t2.power

    @classmethod
    def from_vector(cls, v: Sequence[float], label: BitWord = ()) -> Symbol8D:
        v = np.asarray(v, dtype=float)
        c = v[0::2] + 1j * v[1::2]
        return cls(
            JonesVector(complex(c[0]), complex(c[1])),
            JonesVector(complex(c[2]), complex(c[3])),
            tuple(label),
        )


class PartitionClass(enum.Enum):
    PB = "PB"
    PA = "PA"
    PI = "PI"


def stokes(j: JonesVector) -> StokesVector:
    p = j.power
    if p <= 0:
        raise ValueError("degenerate polarization state")
    c = j.ex * np.conj(j.ey)
    return StokesVector(
        (abs(j.ex) ** 2 - abs(j.ey) ** 2) / p, 2 * c.real / p, -2 * c.imag / p
    )


def classify(s: Symbol8D) -> PartitionClass:
    d = stokes(s.t1).dot(stokes(s.t2))
    if d <= -1 + CLASS_TOL:
        return PartitionClass.PB
    if abs(d) <= CLASS_TOL:
        return PartitionClass.PA
    if d >= 1 - CLASS_TOL:
        return PartitionClass.PI
    raise ValueError(f"symbol not on PDM-QPSK SOP lattice (Stokes dot {d:.3g})")


def partition_census(symbols: Iterable[Symbol8D]) -> dict[PartitionClass, int]:
    counts = {c: 0 for c in PartitionClass}
    for s in symbols:
        counts[classify(s)] += 1
    return counts


def census_str(census: dict[PartitionClass, int]) -> str:
    return " ".join(f"{c.value}={census[c]}" for c in PartitionClass)


def _pairwise_sq(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@dataclass(frozen=True)
class Constellation:
    """Immutable labeled set of 8D symbols.

    ``info_words[i]`` is the information word that selects ``symbols[i]``;
    overhead bits are whatever the label carries beyond it. Symbols are kept
    sorted by label value, which makes label order the tie-break everywhere.
    """

    name: str
    symbols: tuple[Symbol8D, ...]
    info_bits: int
    info_words: tuple[BitWord, ...] = field(default=())

    def __post_init__(self):
        syms = tuple(self.symbols)
        words = tuple(self.info_words) or tuple(
            bitword(i, self.info_bits) for i in range(len(syms))
        )
        if len(words) != len(syms):
            raise ValueError("one information word per symbol required")
        if len(syms) > 1 and len(syms) != 1 << self.info_bits:
            raise ValueError(
                f"{len(syms)} symbols cannot carry {self.info_bits} information bits"
            )
        if len({s.label for s in syms}) != len(syms):
            raise ValueError("labels must be unique")
        if len(set(words)) != len(words):
            raise ValueError("information words must be unique")
        order = sorted(range(len(syms)), key=lambda i: word_value(syms[i].label))
        object.__setattr__(self, "symbols", tuple(syms[i] for i in order))
        object.__setattr__(self, "info_words", tuple(words[i] for i in order))

    def __len__(self) -> int:
        return len(self.symbols)

    @cached_property
    def points(self) -> np.ndarray:
        """(N, 8) array of real coordinates, read-only."""
        p = np.array([s.vector() for s in self.symbols]).reshape(-1, 8)
        p.setflags(write=False)
        return p

    @cached_property
    def info_array(self) -> np.ndarray:
        a = np.array(self.info_words, dtype=np.uint8).reshape(len(self), self.info_bits)
        a.setflags(write=False)
        return a

    @cached_property
    def info_index(self) -> np.ndarray:
        """Lookup table: information word value -> symbol index."""
        table = np.full(1 << self.info_bits, -1, dtype=np.int64)
        for i, w in enumerate(self.info_words):
            table[word_value(w)] = i
        return table

    @cached_property
    def label_index(self) -> dict[BitWord, int]:
        return {s.label: i for i, s in enumerate(self.symbols)}

    @cached_property
    def class_census(self) -> dict[PartitionClass, int]:
        return partition_census(self.symbols)

    @cached_property
    def dmin_sq(self) -> float:
        return min_distance_sq(self)

    def scaled(self, alpha: float) -> Constellation:
        syms = tuple(
            Symbol8D.from_vector(alpha * s.vector(), s.label) for s in self.symbols
        )
        return Constellation(self.name, syms, self.info_bits, self.info_words)


def min_distance_sq(c: Constellation) -> float:
    """Exact minimum squared Euclidean distance over all pairs."""
    if len(c) < 2:
        raise ValueError("minimum distance needs at least 2 symbols")
    d = _pairwise_sq(c.points)
    np.fill_diagonal(d, np.inf)
    return float(d.min())


def neighbor_profile(c: Constellation, point_index: int) -> np.ndarray:
    """Sorted squared distances from one point to every other point."""
    if not 0 <= point_index < len(c):
        raise IndexError(f"point index {point_index} out of range for {len(c)} symbols")
    diff = c.points - c.points[point_index]
    d = np.einsum("ij,ij->i", diff, diff)
    return np.sort(np.delete(d, point_index))


def is_symmetric(c: Constellation, tol: float = 1e-9) -> bool:
    """True if every point sees the same multiset of neighbor distances."""
    if len(c) < 2:
        return True
    d = np.sort(_pairwise_sq(c.points), axis=1)
    return bool(np.all(np.abs(d - d[0]) <= tol))


def distance_spectrum(c: Constellation, decimals: int = 9) -> dict[float, float]:
    """Average number of neighbors at each squared distance."""
    d = np.round(_pairwise_sq(c.points), decimals)
    values, counts = np.unique(d, return_counts=True)
    return {float(v): n / len(c) for v, n in zip(values, counts) if v > 0}
