"""Set-partitioned PDM-QPSK formats in 8D.

Labels are 8 bits b1..b8; b1..b4 pick the Gray-mapped PDM-QPSK point of slot
T1 and b5..b8 the point of slot T2. PB-5B8D carries b1..b5 and derives b6..b8,
PA-7B8D carries b1..b7 and derives b8. PDM-BPSK and PDM-QPSK are the usual
baselines.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geom8d import (
    BitWord,
    Constellation,
    JonesVector,
    PartitionClass,
    Symbol8D,
    bitword,
    census_str,
    classify,
    is_symmetric,
    partition_census,
    word_value,
)

ROLES = ("Ix", "Qx", "Iy", "Qy")
INV_SQRT2 = 1 / np.sqrt(2)


class FormatKind(enum.Enum):
    PDM_BPSK = "PDM-BPSK"
    PDM_QPSK = "PDM-QPSK"
    PB_5B8D = "PB-5B8D"
    PA_7B8D = "PA-7B8D"
    SEARCHED = "SEARCHED"

    @classmethod
    def parse(cls, name: str) -> FormatKind:
        key = name.strip().upper().replace("_", "-")
        for k in cls:
            if k.value == key:
                return k
        raise ValueError(f"unknown format {name!r}")


INFO_BITS = {
    FormatKind.PDM_BPSK: 4,
    FormatKind.PDM_QPSK: 8,
    FormatKind.PB_5B8D: 5,
    FormatKind.PA_7B8D: 7,
}


# --- overhead bits ----------------------------------------------------------


def pb5b8d_overhead(info: Sequence[int]) -> BitWord:
    b1, b2, b3, b4, b5 = _check_bits(info, 5)
    t = b4 ^ b5
    return (b3 ^ t, (1 - b2) ^ t, (1 - b1) ^ t)


def pa7b8d_overhead(info: Sequence[int]) -> int:
    b1, b2, b3, b4, b5, b6, _ = _check_bits(info, 7)
    x = (
        b1 ^ b4 ^ b6
        ^ (b1 & b3) ^ (b1 & b4) ^ (b1 & b5) ^ (b1 & b6)
        ^ (b2 & b3) ^ (b2 & b4) ^ (b2 & b5) ^ (b2 & b6)
        ^ (b3 & b5) ^ (b3 & b6)
        ^ (b4 & b5) ^ (b4 & b6)
    )
    return 1 - x


def _check_bits(bits: Sequence[int], n: int) -> tuple[int, ...]:
    bits = tuple(int(b) for b in bits)
    if len(bits) != n or any(b not in (0, 1) for b in bits):
        raise ValueError(f"expected {n} binary digits, got {bits}")
    return bits


def full_label(kind: FormatKind, info: Sequence[int]) -> BitWord:
    info = tuple(int(b) for b in info)
    if kind is FormatKind.PB_5B8D:
        return info + pb5b8d_overhead(info)
    if kind is FormatKind.PA_7B8D:
        return info + (pa7b8d_overhead(info),)
    return info


# --- label conventions ------------------------------------------------------


def qpsk_point(i: int, q: int) -> complex:
    return complex((1 - 2 * i) * INV_SQRT2, (1 - 2 * q) * INV_SQRT2)


@dataclass(frozen=True)
class LabelConvention:
    """How an 8-bit label drives the four quadratures of each slot.

    ``bit_assignment[p]`` is the role index (into ROLES) driven by label bit
    p of a slot; the same assignment is used for T1 (b1..b4) and T2 (b5..b8).
    ``inversion_mask`` is XORed onto the label (b1 is its MSB) first.
    """

    bit_assignment: tuple[int, int, int, int] = (0, 1, 2, 3)
    inversion_mask: int = 0

    def __post_init__(self):
        if sorted(self.bit_assignment) != [0, 1, 2, 3]:
            raise ValueError(f"bit assignment {self.bit_assignment} is not a permutation")
        if not 0 <= self.inversion_mask < 256:
            raise ValueError("inversion mask must fit in 8 bits")

    def symbol(self, label: Sequence[int]) -> Symbol8D:
        label = _check_bits(label, 8)
        bits = bitword(word_value(label) ^ self.inversion_mask, 8)
        slots = []
        for half in (bits[:4], bits[4:]):
            role = [0] * 4
            for pos, r in enumerate(self.bit_assignment):
                role[r] = half[pos]
            slots.append(JonesVector(qpsk_point(role[0], role[1]), qpsk_point(role[2], role[3])))
        return Symbol8D(slots[0], slots[1], label)

    def describe(self) -> str:
        roles = ",".join(ROLES[r] for r in self.bit_assignment)
        return f"[{roles}] mask=0x{self.inversion_mask:02x}"


CANONICAL = LabelConvention()


def all_conventions() -> list[LabelConvention]:
    return [
        LabelConvention(tuple(p), m)
        for p in itertools.permutations(range(4))
        for m in range(256)
    ]


def qpsk8d_symbols(conv: LabelConvention = CANONICAL) -> list[Symbol8D]:
    """All 256 PDM-QPSK 8D symbols under ``conv``."""
    return [conv.symbol(bitword(v, 8)) for v in range(256)]


class ConventionError(RuntimeError):
    pass


def find_convention() -> list[LabelConvention]:
    """Every convention under which the overhead formulas pick PB / PB+PA sets."""
    pb5 = np.array([word_value(full_label(FormatKind.PB_5B8D, bitword(v, 5))) for v in range(32)])
    pa7 = np.array([word_value(full_label(FormatKind.PA_7B8D, bitword(v, 7))) for v in range(128)])
    order = list(PartitionClass)
    out = []
    for perm in itertools.permutations(range(4)):
        base = LabelConvention(perm, 0)
        # the mask only relabels: class of label l under mask m is class of l ^ m unmasked
        table = np.array([order.index(classify(base.symbol(bitword(v, 8)))) for v in range(256)])
        for mask in range(256):
            if np.any(table[pb5 ^ mask] != order.index(PartitionClass.PB)):
                continue
            counts = np.bincount(table[pa7 ^ mask], minlength=3)
            if counts[order.index(PartitionClass.PB)] == 64 and counts[order.index(PartitionClass.PA)] == 64:
                out.append(LabelConvention(perm, mask))
    if not out:
        raise ConventionError("no label convention reproduces the overhead equations and class census")
    return out


# --- construction -----------------------------------------------------------


def build_format(kind: FormatKind, conv: LabelConvention = CANONICAL) -> Constellation:
    if kind is FormatKind.PDM_BPSK:
        return _build_bpsk()
    if kind is FormatKind.SEARCHED:
        raise ValueError("searched formats come from search_partition")
    n = INFO_BITS[kind]
    words = [bitword(v, n) for v in range(1 << n)]
    symbols = [conv.symbol(full_label(kind, w)) for w in words]
    c = Constellation(kind.value, tuple(symbols), n, tuple(words))
    if kind is FormatKind.PB_5B8D and any(
        v != 0 for k, v in c.class_census.items() if k is not PartitionClass.PB
    ):
        raise ValueError(f"convention {conv.describe()} is invalid for {kind.value}")
    if kind is FormatKind.PA_7B8D and c.class_census[PartitionClass.PI] != 0:
        raise ValueError(f"convention {conv.describe()} is invalid for {kind.value}")
    return c


def _build_bpsk() -> Constellation:
    # one bit per polarization per slot on the in-phase rail: b1=x1, b2=y1, b3=x2, b4=y2
    symbols = []
    for v in range(16):
        a = [1.0 - 2 * b for b in bitword(v, 4)]
        symbols.append(
            Symbol8D(JonesVector(a[0], a[1]), JonesVector(a[2], a[3]), bitword(v, 4))
        )
    return Constellation(FormatKind.PDM_BPSK.value, tuple(symbols), 4)


def build_named(name: str) -> Constellation:
    return build_format(FormatKind.parse(name))


# --- set-partition search ---------------------------------------------------


@dataclass(frozen=True)
class FormatReport:
    name: str
    size: int
    info_bits: int
    census: dict
    dmin_sq: float
    symmetric: bool

    @property
    def se_per_4d(self) -> float:
        return self.info_bits / 2

    def row(self) -> str:
        return (
            f"{self.name:<14} {self.size:>5} {self.info_bits:>9} {self.se_per_4d:>6.1f}"
            f"  {census_str(self.census):<20} {self.dmin_sq:>7.4f}  {'yes' if self.symmetric else 'no'}"
        )


REPORT_HEADER = (
    f"{'format':<14} {'size':>5} {'info bits':>9} {'SE/4D':>6}  {'census':<20} {'dmin^2':>7}  symmetric"
)


def format_report(c: Constellation) -> FormatReport:
    return FormatReport(
        c.name, len(c), c.info_bits, dict(c.class_census), c.dmin_sq, is_symmetric(c)
    )


def search_partition(
    target_info_bits: int,
    seed: int = 0,
    restarts: int = 16,
    conv: LabelConvention = CANONICAL,
) -> tuple[Constellation, FormatReport]:
    """Greedy max-min-distance selection that fills PB, then PA, then PI.

    Each restart seeds the greedy fill with a random first symbol when no
    class is taken whole; candidates are then added one at a time, always the
    one whose distance histogram to the partial set is lexicographically
    smallest (fewest neighbors at the smallest distance, then the next), which
    in particular maximizes its min distance. The first restart
    breaks ties by lowest label, later ones at random. Restarts are scored by
    (dmin^2, symmetric, fewest nearest neighbors).
    """
    if not 4 <= target_info_bits <= 8:
        raise ValueError(f"target information bits must be in 4..8, got {target_info_bits}")
    rng = np.random.default_rng(seed)
    base = qpsk8d_symbols(conv)
    points = np.array([s.vector() for s in base])
    classes = [classify(s) for s in base]
    pools = [[i for i, c in enumerate(classes) if c is k] for k in PartitionClass]
    need = 1 << target_info_bits

    # whole classes that fit are taken; the first class that does not fit is searched
    fixed: list[int] = []
    partial_pool: list[int] = []
    for pool in pools:
        if len(fixed) + len(pool) <= need:
            fixed.extend(pool)
        else:
            partial_pool = pool
            break
    k = need - len(fixed)

    d2 = np.round(np.einsum("ijk,ijk->ij", points[:, None] - points[None], points[:, None] - points[None]), 9)
    levels = np.unique(d2)
    best_sel, best_score = None, None
    for restart in range(max(1, restarts) if k else 1):
        sel = list(fixed)
        remaining = list(partial_pool)
        if k:
            if not sel:
                first = remaining[int(rng.integers(len(remaining)))]
                sel.append(first)
                remaining.remove(first)
            while len(sel) < need:
                # neighbor histogram per candidate, compared smallest distance first;
                # lexicographic minimum also maximizes the min distance
                hist = (d2[np.ix_(remaining, sel)][..., None] == levels).sum(axis=1)
                order = np.lexsort(hist.T[::-1])
                ties = np.flatnonzero((hist == hist[order[0]]).all(axis=1))
                # restart 0 keeps label order on ties, later restarts draw among them
                j = int(ties[0] if restart == 0 else rng.choice(ties))
                sel.append(remaining.pop(j))
        dd = np.round(d2[np.ix_(sel, sel)] + np.diag(np.full(len(sel), np.inf)), 9)
        dmin = float(dd.min())
        kiss = int((dd == dmin).sum())
        sym = bool(np.all(np.sort(dd, axis=1) == np.sort(dd, axis=1)[0]))
        score = (dmin, sym, -kiss)
        if best_score is None or score > best_score:
            best_sel, best_score = sorted(sel), score

    symbols = tuple(base[i] for i in best_sel)
    c = Constellation(f"SEARCHED-{target_info_bits}B8D", symbols, target_info_bits)
    return c, format_report(c)


# --- Boolean fitting of labelings ------------------------------------------


def anf(truth: Sequence[int]) -> list[int]:
    """Algebraic normal form coefficients (Moebius transform) of a truth table."""
    a = [int(t) & 1 for t in truth]
    n = len(a)
    step = 1
    while step < n:
        for i in range(n):
            if i & step:
                a[i] ^= a[i ^ step]
        step <<= 1
    return a


def anf_string(coeffs: Sequence[int], nvars: int) -> str:
    monomials = []
    for mask, c in enumerate(coeffs):
        if c:
            # truth table index bit (nvars-1-k) is variable b(k+1)
            monomials.append(tuple(k + 1 for k in range(nvars) if mask >> (nvars - 1 - k) & 1))
    monomials.sort(key=lambda m: (len(m), m))
    terms = ["·".join(f"b{k}" for k in m) if m else "1" for m in monomials]
    return " ⊕ ".join(terms) if terms else "0"


def fit_overhead(c: Constellation) -> dict[int, str]:
    """Fit each label bit of ``c`` as a Boolean function of its information word.

    Returns label position (1-based) -> ANF expression, for positions that are
    not simply copied from the information word.
    """
    n = c.info_bits
    label_len = len(c.symbols[0].label)
    out = {}
    for pos in range(label_len):
        truth = [0] * (1 << n)
        for w, s in zip(c.info_words, c.symbols):
            truth[word_value(w)] = s.label[pos]
        expr = anf_string(anf(truth), n)
        if expr != f"b{pos + 1}":
            out[pos + 1] = expr
    return out


def affine_over_gf2(f: Callable[[BitWord], Sequence[int]], n: int) -> bool:
    """Exhaustively check f(u) ^ f(v) ^ f(0) == f(u ^ v) for all n-bit u, v."""
    f0 = np.array(f(bitword(0, n)))
    for u in range(1 << n):
        fu = np.array(f(bitword(u, n)))
        for v in range(1 << n):
            lhs = fu ^ np.array(f(bitword(v, n))) ^ f0
            if np.any(lhs != np.array(f(bitword(u ^ v, n)))):
                return False
    return True


# --- bit mapping and decisions ---------------------------------------------


def encode_stream(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Chunk a bit stream into information words; returns symbol indices into ``c``."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % c.info_bits:
        raise ValueError(
            f"stream length {bits.size} is not a multiple of {c.info_bits} information bits"
        )
    words = bits.reshape(-1, c.info_bits)
    weights = 1 << np.arange(c.info_bits - 1, -1, -1)
    return c.info_index[words @ weights]


def encode_symbols(bits: np.ndarray, c: Constellation) -> list[Symbol8D]:
    return [c.symbols[i] for i in encode_stream(bits, c)]


def ml_indices(received: np.ndarray, c: Constellation) -> np.ndarray:
    """Nearest constellation point for each row of an (M, 8) array."""
    if len(c) == 0:
        raise ValueError("empty constellation")
    r = np.atleast_2d(np.asarray(received, dtype=float))
    p = c.points
    # |r - p|^2 up to the per-row constant |r|^2
    metric = np.einsum("ij,ij->i", p, p)[None, :] - 2 * r @ p.T
    return np.argmin(metric, axis=1)


def ml_decide(received: Sequence[float], c: Constellation) -> tuple[BitWord, BitWord]:
    i = int(ml_indices(received, c)[0])
    return c.symbols[i].label, c.info_words[i]


def demap_stream(received: np.ndarray, c: Constellation) -> np.ndarray:
    """Hard ML decisions on (M, 8) received vectors back to a flat bit stream."""
    return c.info_array[ml_indices(received, c)].ravel()
