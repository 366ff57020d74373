"""Monte Carlo BER / Q^2 estimation over the full transmission chain.

Seeding: every random stream is ``default_rng(SeedSequence(seed, spawn_key=key))``
with keys

* ``(r // reuse, 0, ch)``: information bits of WDM channel ``ch``
* ``(r, 1)``: receiver noise of realization ``r``

A realization is one noise loading of a propagated record; ``reuse``
consecutive realizations share data (and hence the expensive propagation),
the noise being added only at the receiver.

The keys do not depend on launch power or span count, so the points of a
sweep share data and noise (common random numbers) and curves are smooth.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import erfcinv

from .channel import LinkConfig, propagate_link, receiver_noise
from .formats import FormatKind, build_format, encode_stream, ml_indices
from .geom8d import Constellation
from .waveform import (
    EqualizerConfig,
    PulseShapeSpec,
    channel_offsets,
    channel_select,
    equalize,
    from_slots,
    pulse_shape,
    to_slots,
    wdm_mux,
)

log = logging.getLogger(__name__)

FEC_THRESHOLD_DB = 4.9
THREADS_ENV = "SETPART8D_THREADS"

FLAG_ERROR_FREE = "error-free"
FLAG_UPPER_BOUND = "ber upper bound"
FLAG_FAILED = "failed"


def q2_from_ber(ber: float) -> float:
    """Q^2 in dB from a bit error ratio, Q = sqrt(2) erfcinv(2 BER)."""
    if ber >= 0.5:
        raise ValueError("no decision gain (BER >= 0.5)")
    if ber <= 0:
        raise ValueError("Q^2 needs errors (BER <= 0)")
    return 20 * math.log10(math.sqrt(2) * float(erfcinv(2 * ber)))


def ber_from_q2(q2_db: float) -> float:
    q = 10 ** (q2_db / 20)
    return 0.5 * math.erfc(q / math.sqrt(2))


@dataclass(frozen=True)
class SimConfig:
    format: FormatKind = FormatKind.PDM_QPSK
    baud: float = 32e9
    sps: int = 64
    rolloff: float = 0.1
    rrc_span: int = 64
    channels: int = 5
    grid_hz: float = 37.5e9
    seq_log2: int = 16
    training_symbols: int = 1024
    link: LinkConfig = field(default_factory=LinkConfig)
    power_dbm: float = -7.0
    seed: int = 1
    min_errors: int = 400
    realization_cap: int = 64
    reuse_propagation: int = 1
    equalizer_step: float = 1e-2
    equalizer_passes: int = 4

    def __post_init__(self):
        if self.channels < 1 or self.channels % 2 == 0:
            raise ValueError("channel count must be odd")
        for name in ("baud", "sps", "grid_hz", "seq_log2", "training_symbols",
                     "min_errors", "realization_cap", "reuse_propagation"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def pulse(self) -> PulseShapeSpec:
        return PulseShapeSpec(self.rolloff, self.sps, self.rrc_span, self.baud)

    @property
    def equalizer(self) -> EqualizerConfig:
        return EqualizerConfig(
            training_symbols=self.training_symbols,
            step_size=self.equalizer_step,
            passes=self.equalizer_passes,
        )

    def n_blocks(self, c: Constellation) -> int:
        """8D blocks per record: ``2**seq_log2`` label bits on each polarization."""
        label_bits_per_pol = len(c.symbols[0].label) // 2
        return (1 << self.seq_log2) // label_bits_per_pol

    def snapshot(self) -> dict:
        d = asdict(self)
        d["format"] = self.format.value
        d["link"]["nonlinear_model"] = self.link.nonlinear_model.value
        return d


@dataclass(frozen=True)
class BerRecord:
    bits_compared: int
    bit_errors: int
    realizations: int
    flagged: Optional[str] = None

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_compared if self.bits_compared else math.nan

    @property
    def q2_db(self) -> float:
        if not self.bits_compared:
            return math.nan
        if self.bit_errors == 0:
            return math.inf
        return q2_from_ber(min(self.ber, 0.5 - 1e-12))


class Axis(enum.Enum):
    POWER_DBM = "power_dbm"
    SPANS = "spans"


@dataclass
class SweepResult:
    axis: Axis
    format: FormatKind
    config: SimConfig
    points: list[tuple[float, BerRecord]]

    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.points], dtype=float)

    def q2(self) -> np.ndarray:
        return np.array([r.q2_db for _, r in self.points])

    def distances_km(self) -> np.ndarray:
        if self.axis is Axis.SPANS:
            return self.values() * self.config.link.span.length_km
        return np.full(len(self.points), self.config.link.spans * self.config.link.span.length_km)


# --- single point -----------------------------------------------------------


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _transmit(cfg: SimConfig, c: Constellation, realization: int):
    n_blocks = cfg.n_blocks(c)
    fields, center = [], None
    for ch, k in enumerate(channel_offsets(cfg.channels)):
        bits = _rng(cfg.seed, realization, 0, ch).integers(0, 2, n_blocks * c.info_bits, dtype=np.int8)
        idx = encode_stream(bits, c)
        fields.append(pulse_shape(c.points[idx], cfg.pulse, cfg.power_dbm))
        if k == 0:
            center = (bits, idx)
    return wdm_mux(fields, cfg.grid_hz, cfg.pulse), center


def _count_errors(cfg: SimConfig, c: Constellation, rx, bits, idx) -> tuple[int, int]:
    sent = to_slots(c.points[idx])
    eq = equalize(rx, sent[:, : cfg.training_symbols], cfg.equalizer)
    blocks = from_slots(eq)
    skip = -(-cfg.training_symbols // 2)  # 8D blocks touched by training
    decided = c.info_array[ml_indices(blocks[skip:], c)]
    ref = bits.reshape(-1, c.info_bits)[skip:]
    return int(np.count_nonzero(decided != ref)), ref.size


def run_point(cfg: SimConfig) -> BerRecord:
    """Count information-bit errors on the center channel until the stopping rule."""
    c = build_format(cfg.format)
    if cfg.n_blocks(c) < cfg.training_symbols:
        raise ValueError("sequence too short for the training prefix")
    noisy = cfg.link.noise and cfg.link.loaded_spans > 0
    errors = compared = realizations = 0
    data_index, out = -1, None
    for r in range(cfg.realization_cap):
        if r // cfg.reuse_propagation != data_index:
            data_index = r // cfg.reuse_propagation
            tx, (bits, idx) = _transmit(cfg, c, data_index)
            out = propagate_link(tx, cfg.link)
        rx = receiver_noise(out, cfg.link, _rng(cfg.seed, r, 1))
        e, n = _count_errors(cfg, c, channel_select(rx, 0, cfg.grid_hz, cfg.pulse), bits, idx)
        errors += e
        compared += n
        realizations += 1
        log.debug("%s %.2f dBm r=%d errors=%d/%d", c.name, cfg.power_dbm, r, errors, compared)
        if errors >= cfg.min_errors or (not noisy and errors == 0):
            break
    flag = None
    if errors == 0:
        flag = FLAG_ERROR_FREE
    elif errors < cfg.min_errors:
        flag = FLAG_UPPER_BOUND
    return BerRecord(compared, errors, realizations, flag)


# --- sweeps ---------------------------------------------------------------


def _safe_point(cfg: SimConfig) -> BerRecord:
    try:
        return run_point(cfg)
    except Exception as exc:  # a failed point must not sink the sweep
        log.warning("point failed: %s", exc)
        return BerRecord(0, 0, 0, f"{FLAG_FAILED}: {exc}")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _run_all(cfgs: Sequence[SimConfig]) -> list[BerRecord]:
    n = min(_threads(), len(cfgs))
    if n <= 1:
        return [_safe_point(c) for c in cfgs]
    with ProcessPoolExecutor(n) as ex:
        return list(ex.map(_safe_point, cfgs))  # map keeps point order


def _check_increasing(values: Sequence[float]) -> None:
    if not len(values):
        raise ValueError("sweep needs at least one point")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("sweep axis values must be strictly increasing")


def sweep_power(cfg: SimConfig, powers: Sequence[float]) -> SweepResult:
    _check_increasing(powers)
    cfgs = [replace(cfg, power_dbm=float(p)) for p in powers]
    recs = _run_all(cfgs)
    return SweepResult(Axis.POWER_DBM, cfg.format, cfg, list(zip(map(float, powers), recs)))


def sweep_reach(cfg: SimConfig, span_counts: Sequence[int]) -> SweepResult:
    _check_increasing(span_counts)
    cfgs = [replace(cfg, link=cfg.link.with_spans(int(n))) for n in span_counts]
    recs = _run_all(cfgs)
    return SweepResult(Axis.SPANS, cfg.format, cfg, list(zip(map(float, span_counts), recs)))


def reach_at_threshold(
    distances_km: Sequence[float], q2_db: Sequence[float], threshold_db: float = FEC_THRESHOLD_DB
) -> float:
    """Distance where Q^2 first falls through the threshold, linearly interpolated."""
    d = np.asarray(distances_km, dtype=float)
    q = np.asarray(q2_db, dtype=float)
    for i in range(len(d) - 1):
        if np.isfinite(q[i]) and np.isfinite(q[i + 1]) and q[i] >= threshold_db > q[i + 1]:
            return float(d[i] + (q[i] - threshold_db) / (q[i] - q[i + 1]) * (d[i + 1] - d[i]))
    raise ValueError("threshold not bracketed")


def sweep_reach_km(sweep: SweepResult, threshold_db: float = FEC_THRESHOLD_DB) -> float:
    return reach_at_threshold(sweep.distances_km(), sweep.q2(), threshold_db)


# --- serialization ---------------------------------------------------------

CSV_COLUMNS = [
    "format", "axis", "axis_value", "power_dbm", "spans", "distance_km",
    "bits_compared", "bit_errors", "ber", "q2_db", "flagged",
]


def _num(x: float) -> str:
    return f"{x:.10g}"


def sweep_rows(sweep: SweepResult) -> list[dict]:
    rows = []
    for value, rec in sweep.points:
        if sweep.axis is Axis.POWER_DBM:
            power, spans = value, sweep.config.link.spans
        else:
            power, spans = sweep.config.power_dbm, int(value)
        rows.append({
            "format": sweep.format.value,
            "axis": sweep.axis.value,
            "axis_value": _num(value),
            "power_dbm": _num(power),
            "spans": str(spans),
            "distance_km": _num(spans * sweep.config.link.span.length_km),
            "bits_compared": str(rec.bits_compared),
            "bit_errors": str(rec.bit_errors),
            "ber": _num(rec.ber),
            "q2_db": _num(rec.q2_db),
            "flagged": rec.flagged or "",
        })
    return rows


def sweeps_to_csv(sweeps: Sequence[SweepResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for s in sweeps:
        w.writerows(sweep_rows(s))
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def sweeps_from_csv(text: str, config: SimConfig) -> list[SweepResult]:
    """Rebuild sweeps (one per format, in file order) from ``sweeps_to_csv`` output."""
    groups: dict[tuple[str, str], list[tuple[float, BerRecord]]] = {}
    for row in read_csv(text):
        rec = BerRecord(int(row["bits_compared"]), int(row["bit_errors"]), 0, row["flagged"] or None)
        groups.setdefault((row["format"], row["axis"]), []).append((float(row["axis_value"]), rec))
    out = []
    for (fmt, axis), points in groups.items():
        kind = FormatKind.parse(fmt)
        out.append(SweepResult(Axis(axis), kind, replace(config, format=kind), points))
    return out

