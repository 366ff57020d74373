"""Transmitter and receiver DSP around the fiber link.

Every filter here is circular (applied by FFT over the whole record), so a
record is one period of a periodic signal. That matches the split-step
propagation, which is periodic as well, and removes edge effects.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import fft as sfft

from .geom8d import Symbol8D

C_LIGHT = 299_792_458.0
REF_WAVELENGTH = 1550e-9


@dataclass
class SampledField:
    """Dual-polarization complex envelope in sqrt(W); ``data`` rows are x, y."""

    data: np.ndarray
    sample_rate: float
    center_wavelength: float = REF_WAVELENGTH

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2 or self.data.shape[0] != 2:
            raise ValueError("field data must have shape (2, n)")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    @property
    def x(self) -> np.ndarray:
        return self.data[0]

    @property
    def y(self) -> np.ndarray:
        return self.data[1]

    def __len__(self) -> int:
        return self.data.shape[1]

    def power(self) -> float:
        """Average optical power in W."""
        return float(np.mean(np.abs(self.data[0]) ** 2 + np.abs(self.data[1]) ** 2))

    def power_dbm(self) -> float:
        return 10 * np.log10(self.power() / 1e-3)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2)) / self.sample_rate

    def with_data(self, data: np.ndarray) -> SampledField:
        return replace(self, data=data)

    def omega(self) -> np.ndarray:
        """Angular frequency grid (rad/s) matching ``fft(data)`` bins."""
        return 2 * np.pi * sfft.fftfreq(len(self), 1 / self.sample_rate)


@dataclass(frozen=True)
class PulseShapeSpec:
    rolloff: float = 0.1
    sps: int = 64
    span: int = 64
    baud: float = 32e9

    def __post_init__(self):
        if not 0 < self.rolloff <= 1:
            raise ValueError("roll-off must be in (0, 1]")
        if self.sps < 2 or self.sps % 2:
            raise ValueError("samples per symbol must be even")
        if self.span < 1:
            raise ValueError("filter span must be at least one symbol")

    @property
    def sample_rate(self) -> float:
        return self.sps * self.baud

    @property
    def bandwidth(self) -> float:
        return self.baud * (1 + self.rolloff)


@dataclass(frozen=True)
class EqualizerConfig:
    taps: int = 11
    training_symbols: int = 1024
    step_size: float = 1e-2
    passes: int = 4
    spacing: int = 2

    def __post_init__(self):
        if self.taps % 2 == 0:
            raise ValueError("equalizer needs an odd tap count")
        if self.training_symbols < self.taps:
            raise ValueError("training sequence shorter than the filter")


class EqualizerDiverged(RuntimeError):
    pass


def rrc_taps(spec: PulseShapeSpec) -> np.ndarray:
    """Unit-energy root-raised-cosine impulse response, ``span*sps + 1`` taps."""
    beta = spec.rolloff
    half = spec.span * spec.sps // 2
    t = np.arange(-half, half + 1) / spec.sps
    h = np.empty_like(t)
    at_zero = np.isclose(t, 0.0, atol=1e-12)
    at_sing = np.isclose(np.abs(4 * beta * t), 1.0, atol=1e-12)
    reg = ~(at_zero | at_sing)
    tr = t[reg]
    h[reg] = (
        np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    ) / (np.pi * tr * (1 - (4 * beta * tr) ** 2))
    h[at_zero] = 1 - beta + 4 * beta / np.pi
    h[at_sing] = beta / np.sqrt(2) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )
    return h / np.sqrt(np.sum(h**2))


def _circular_response(taps: np.ndarray, n: int) -> np.ndarray:
    """Frequency response of a centered FIR wrapped onto an n-point circle."""
    half = len(taps) // 2
    kernel = np.zeros(n)
    np.add.at(kernel, np.arange(-half, half + 1) % n, taps)
    return sfft.fft(kernel)


def circular_filter(data: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return sfft.ifft(sfft.fft(data, axis=-1) * _circular_response(taps, data.shape[-1]), axis=-1)


def to_slots(symbols: np.ndarray | Sequence[Symbol8D]) -> np.ndarray:
    """(M, 8) real 8D points, or Symbol8D objects, to a (2, 2M) slot array."""
    if len(symbols) and isinstance(symbols[0], Symbol8D):
        symbols = np.array([s.vector() for s in symbols])
    p = np.asarray(symbols, dtype=float).reshape(-1, 8)
    c = p[:, 0::2] + 1j * p[:, 1::2]  # columns x1, y1, x2, y2
    return np.stack([c[:, [0, 2]].ravel(), c[:, [1, 3]].ravel()])


def from_slots(slots: np.ndarray) -> np.ndarray:
    """Inverse of ``to_slots``: (2, 2M) complex slots to (M, 8) real points."""
    slots = np.asarray(slots)
    if slots.shape[1] % 2:
        raise ValueError("8D blocks need an even number of slots")
    x = slots[0].reshape(-1, 2)
    y = slots[1].reshape(-1, 2)
    c = np.stack([x[:, 0], y[:, 0], x[:, 1], y[:, 1]], axis=1)
    return np.stack([c.real, c.imag], axis=2).reshape(-1, 8)


def launch_amplitude(power_dbm: float, sps: int) -> float:
    """Symbol amplitude giving ``power_dbm`` for unit-energy-per-polarization slots."""
    return float(np.sqrt(1e-3 * 10 ** (power_dbm / 10) * sps / 2))


def pulse_shape(
    symbols: np.ndarray | Sequence[Symbol8D], spec: PulseShapeSpec, power_dbm: float
) -> SampledField:
    slots = to_slots(symbols)
    if slots.shape[1] == 0:
        raise ValueError("nothing to modulate")
    n = slots.shape[1] * spec.sps
    up = np.zeros((2, n), dtype=complex)
    up[:, :: spec.sps] = slots
    data = circular_filter(up, rrc_taps(spec)) * launch_amplitude(power_dbm, spec.sps)
    return SampledField(data, spec.sample_rate)


def frequency_shift(field: SampledField, shift_hz: float) -> SampledField:
    t = np.arange(len(field)) / field.sample_rate
    return field.with_data(field.data * np.exp(2j * np.pi * shift_hz * t))


def channel_offsets(count: int) -> np.ndarray:
    return np.arange(count) - (count - 1) // 2


def wdm_mux(channels: Sequence[SampledField], grid_hz: float, spec: PulseShapeSpec) -> SampledField:
    n = len(channels)
    if n == 0 or n % 2 == 0:
        raise ValueError("WDM comb needs an odd number of channels")
    fs = channels[0].sample_rate
    if any(ch.sample_rate != fs or len(ch) != len(channels[0]) for ch in channels):
        raise ValueError("channels must share sample rate and length")
    if fs <= (n - 1) * grid_hz + spec.bandwidth:
        raise ValueError(
            f"sample rate {fs:.4g} Hz aliases a {n}-channel comb on a {grid_hz:.4g} Hz grid"
        )
    out = np.zeros_like(channels[0].data)
    for k, ch in zip(channel_offsets(n), channels):
        out += ch.data if k == 0 else frequency_shift(ch, k * grid_hz).data
    return SampledField(out, fs, channels[0].center_wavelength)


def channel_select(
    field: SampledField, k: int, grid_hz: float, spec: PulseShapeSpec
) -> SampledField:
    """Bring channel k to baseband, matched-filter it, decimate to 2 samples/symbol."""
    if not np.isclose(field.sample_rate, spec.sample_rate):
        raise ValueError("field sample rate does not match the pulse spec")
    base = frequency_shift(field, -k * grid_hz) if k else field
    filtered = circular_filter(base.data, rrc_taps(spec))
    step = spec.sps // 2
    return SampledField(filtered[:, ::step], field.sample_rate / step, field.center_wavelength)


def _windows(data: np.ndarray, centers: np.ndarray, taps: int) -> np.ndarray:
    """(2, len(centers), taps) circular windows, reversed so tap 0 is the newest sample."""
    half = taps // 2
    idx = (centers[:, None] + np.arange(half, -half - 1, -1)[None, :]) % data.shape[1]
    return data[:, idx]


def _butterfly(w: np.ndarray, win: np.ndarray) -> np.ndarray:
    return np.einsum("pqn,qkn->pk", w, win)


def equalize(
    field: SampledField,
    training: np.ndarray,
    cfg: EqualizerConfig = EqualizerConfig(),
    return_taps: bool = False,
):
    """Data-aided 2x2 butterfly FIR equalizer at ``cfg.spacing`` samples/symbol.

    Taps start as a center-tap identity and adapt by LMS over the training
    prefix (``cfg.passes`` sweeps, step divided by 4 after each), then freeze
    and filter the whole record. Output is (2, n_symbols) at one sample per
    symbol, scaled to the training constellation.
    """
    training = np.asarray(training, dtype=complex)
    if training.shape != (2, cfg.training_symbols):
        raise ValueError(f"training must have shape (2, {cfg.training_symbols})")
    data = field.data
    power = np.mean(np.abs(data) ** 2)
    if power <= 0:
        raise EqualizerDiverged("no signal at equalizer input")
    data = data / np.sqrt(power)
    n_sym = data.shape[1] // cfg.spacing
    if n_sym < cfg.training_symbols:
        raise ValueError("record shorter than the training sequence")

    w = np.zeros((2, 2, cfg.taps), dtype=complex)
    w[0, 0, cfg.taps // 2] = w[1, 1, cfg.taps // 2] = 1.0
    train_win = _windows(data, np.arange(cfg.training_symbols) * cfg.spacing, cfg.taps)

    def mse(w):
        return float(np.mean(np.abs(_butterfly(w, train_win) - training) ** 2))

    mse0 = mse(w)
    mu = cfg.step_size
    win_t = np.ascontiguousarray(train_win.transpose(1, 0, 2))  # (k, q, n)
    conj_t = win_t.conj()
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is judged below
        for _ in range(cfg.passes):
            for k in range(cfg.training_symbols):
                e = training[:, k] - np.einsum("pqn,qn->p", w, win_t[k])
                w += mu * e[:, None, None] * conj_t[k][None]
            mu /= 4
    mse1 = mse(w)
    if not np.isfinite(mse1) or mse1 > mse0:
        raise EqualizerDiverged(
            f"equalizer diverged (step size too large): training MSE {mse0:.3g} -> {mse1:.3g}"
        )
    out = _butterfly(w, _windows(data, np.arange(n_sym) * cfg.spacing, cfg.taps))
    return (out, w) if return_taps else out
