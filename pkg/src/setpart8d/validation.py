"""Analytic checks of the channel and receiver blocks.

Each check builds its own small field, compares against a closed form and
returns a ``Check``; ``run_all`` is what ``setpart8d validate-channel`` prints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import fft as sfft

from .channel import (
    LinkConfig,
    NonlinearModel,
    SpanParams,
    ase_psd,
    ideal_dcf,
    load_noise,
    propagate_link,
    propagate_span,
)
from .formats import FormatKind, build_format
from .waveform import (
    EqualizerConfig,
    PulseShapeSpec,
    SampledField,
    channel_select,
    equalize,
    from_slots,
    launch_amplitude,
    pulse_shape,
    to_slots,
    wdm_mux,
)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<44} {self.value:.3e}  (tol {self.tolerance:.1e})"


def _rms_rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(a - b) ** 2) / np.mean(np.abs(b) ** 2)))


def _random_field(n: int, fs: float, seed: int = 0, power_w: float = 1e-3) -> SampledField:
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))
    data *= math.sqrt(power_w / np.mean(np.sum(np.abs(data) ** 2, axis=0)))
    return SampledField(data, fs)


def dispersion_only(tol: float = 1e-9) -> Check:
    p = SpanParams(alpha_db_km=0.0, gamma_w_km=0.0)
    f = _random_field(4096, 512e9)
    out = propagate_span(f, p)
    w = f.omega()
    expect = sfft.ifft(sfft.fft(f.data, axis=-1) * np.exp(0.5j * p.beta2 * w**2 * p.length_km * 1e3), axis=-1)
    err = _rms_rel(out.data, expect)
    return Check("dispersion-only SSFM vs transfer function", err, tol, err <= tol)


def cw_manakov_phase(tol: float = 1e-9) -> Check:
    p = SpanParams(alpha_db_km=0.0, d_ps_nm_km=0.0)
    power = 10e-3
    n = 256
    data = np.stack([np.full(n, math.sqrt(power / 2) * np.exp(0.3j)), np.full(n, math.sqrt(power / 2))])
    out = propagate_span(SampledField(data, 512e9), p, NonlinearModel.MANAKOV)
    measured = np.angle(out.data * np.conj(data))
    expect = p.gamma * 8 / 9 * power * p.length_km * 1e3
    err = float(np.max(np.abs(measured - expect)) / expect)
    return Check("CW Manakov nonlinear phase", err, tol, err <= tol)


def dcf_identity(tol: float = 1e-9) -> Check:
    p = SpanParams(alpha_db_km=0.0, gamma_w_km=0.0)
    f = _random_field(4096, 512e9, seed=1)
    back = ideal_dcf(propagate_span(f, p), p.accumulated_dispersion)
    err = _rms_rel(back.data, f.data)
    return Check("dispersion + ideal DCF identity", err, tol, err <= tol)


def noise_psd(tol: float = 0.01, n: int = 1 << 20, seed: int = 7) -> Check:
    spans, nf, gain = 20, 7.0, 15.0
    fs = 64e9
    f = SampledField(np.zeros((2, n), dtype=complex), fs)
    noisy = load_noise(f, spans, nf, gain, np.random.default_rng(seed))
    spec = sfft.fft(noisy.data, axis=-1)
    freqs = sfft.fftfreq(n, 1 / fs)
    band = np.abs(freqs) <= 12.5e9 / 2
    # periodogram: |X_k|^2 / (n fs) is the PSD estimate at bin k, bin width fs / n
    measured = float(np.sum(np.abs(spec[:, band]) ** 2) / (n * fs) * (fs / n))
    expect = ase_psd(spans, nf, gain) * 12.5e9 * 2
    err = abs(measured / expect - 1)
    return Check("ASE power in 12.5 GHz vs closed form", err, tol, err <= tol)


def step_halving(tol: float = 1e-3, spans: int = 5, power_dbm: float = -3.0) -> Check:
    spec = PulseShapeSpec(sps=16, span=64)
    c = build_format(FormatKind.PDM_QPSK)
    rng = np.random.default_rng(3)
    fields = [pulse_shape(c.points[rng.integers(0, 256, 1024)], spec, power_dbm) for _ in range(3)]
    tx = wdm_mux(fields, 37.5e9, spec)
    amp = launch_amplitude(power_dbm, spec.sps)
    base = SpanParams()
    outs = []
    for step in (base.step_km, base.step_km / 2):
        link = LinkConfig(spans=spans, span=replace(base, step_km=step))
        outs.append(channel_select(propagate_link(tx, link), 0, 37.5e9, spec).data[:, ::2] / amp)
    err = _rms_rel(outs[0], outs[1])
    return Check(f"step halving, {spans} spans at {power_dbm:g} dBm", err, tol, err <= tol)


def back_to_back(tol: float = 1e-3) -> Check:
    spec = PulseShapeSpec(sps=16, span=64)
    c = build_format(FormatKind.PDM_QPSK)
    rng = np.random.default_rng(4)
    points = c.points[rng.integers(0, 256, 2048)]
    f = pulse_shape(points, spec, 0.0)
    rx = channel_select(f, 0, 37.5e9, spec).data[:, ::2] / launch_amplitude(0.0, spec.sps)
    err = float(np.sqrt(np.mean(np.abs(rx - to_slots(points)) ** 2)))
    return Check("back-to-back Nyquist cascade RMS", err, tol, err <= tol)


def equalizer_rotation(tol_db: float = -30.0) -> Check:
    spec = PulseShapeSpec(sps=16, span=64)
    c = build_format(FormatKind.PDM_QPSK)
    rng = np.random.default_rng(5)
    slots = to_slots(c.points[rng.integers(0, 256, 2048)])
    rx = channel_select(pulse_shape(from_slots(slots), spec, 0.0), 0, 37.5e9, spec)
    rot = np.array([[0, 1], [1, 0]])
    rx = rx.with_data(rot @ rx.data)
    cfg = EqualizerConfig()
    out = equalize(rx, slots[:, : cfg.training_symbols], cfg)
    mse_db = 10 * math.log10(np.mean(np.abs(out - slots) ** 2))
    return Check("equalizer undoes 90 deg rotation, MSE dB", mse_db, tol_db, mse_db <= tol_db)


CHECKS: list[Callable[[], Check]] = [
    dispersion_only,
    cw_manakov_phase,
    dcf_identity,
    noise_psd,
    step_halving,
    back_to_back,
    equalizer_rotation,
]


def run_all() -> list[Check]:
    return [check() for check in CHECKS]
