"""Dispersion-managed fiber link: SSFM spans, ideal DCF, flat gain, ASE loading."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import fft as sfft

from .waveform import C_LIGHT, SampledField

H_PLANCK = 6.62607015e-34
MANAKOV_FACTOR = 8 / 9


class NonlinearModel(enum.Enum):
    MANAKOV = "manakov"
    SCALAR_TEST = "scalar"  # independent NLSE per polarization, validation only


@dataclass(frozen=True)
class SpanParams:
    length_km: float = 75.0
    alpha_db_km: float = 0.2
    d_ps_nm_km: float = 4.0
    gamma_w_km: float = 1.3
    step_km: float = 0.5
    wavelength: float = 1550e-9

    def __post_init__(self):
        for name in ("length_km", "step_km"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("alpha_db_km", "d_ps_nm_km", "gamma_w_km"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def alpha_np_m(self) -> float:
        """Power attenuation in 1/m."""
        return self.alpha_db_km / (10 * math.log10(math.e)) / 1e3

    @property
    def beta2(self) -> float:
        """Group velocity dispersion in s^2/m."""
        d = self.d_ps_nm_km * 1e-6  # ps/(nm km) -> s/m^2
        return -d * self.wavelength**2 / (2 * math.pi * C_LIGHT)

    @property
    def gamma(self) -> float:
        return self.gamma_w_km / 1e3

    @property
    def loss_db(self) -> float:
        return self.alpha_db_km * self.length_km

    @property
    def accumulated_dispersion(self) -> float:
        """Span dispersion in ps/nm."""
        return self.d_ps_nm_km * self.length_km


@dataclass(frozen=True)
class LinkConfig:
    spans: int = 60
    span: SpanParams = field(default_factory=SpanParams)
    nf_db: float = 7.0
    amp_gain_db: Optional[float] = None  # None: equal to span loss
    dcf: bool = True
    nonlinear_model: NonlinearModel = NonlinearModel.MANAKOV
    noise_spans: Optional[int] = None  # spans of ASE to load; None: ``spans``
    noise: bool = True

    def __post_init__(self):
        if self.spans < 0:
            raise ValueError("span count must be non-negative")

    @property
    def gain_db(self) -> float:
        return self.span.loss_db if self.amp_gain_db is None else self.amp_gain_db

    @property
    def loaded_spans(self) -> int:
        return self.spans if self.noise_spans is None else self.noise_spans

    def with_spans(self, spans: int) -> LinkConfig:
        return replace(self, spans=spans)


def _steps(length_km: float, step_km: float) -> list[float]:
    n = int(math.floor(length_km / step_km + 1e-9))
    steps = [step_km] * n
    rest = length_km - n * step_km
    if rest > 1e-9 * length_km:
        steps.append(rest)
    return [s * 1e3 for s in steps]


def _effective_length(alpha: float, dz: float) -> float:
    # nonlinear length of a step whose power is referenced to the step midpoint
    if alpha * dz < 1e-12:
        return dz
    return 2 * math.sinh(alpha * dz / 2) / alpha


def _nonlinear_phase(data: np.ndarray, coeff: float, model: NonlinearModel) -> np.ndarray:
    px = data[0].real ** 2 + data[0].imag ** 2
    py = data[1].real ** 2 + data[1].imag ** 2
    if model is NonlinearModel.MANAKOV:
        phi = (px + py) * (coeff * MANAKOV_FACTOR)
        rot = np.cos(phi) + 1j * np.sin(phi)
        return data * rot
    return data * np.exp(1j * coeff * np.stack([px, py]))


def propagate_span(
    field: SampledField,
    p: SpanParams,
    model: NonlinearModel = NonlinearModel.MANAKOV,
    step_km: Optional[float] = None,
) -> SampledField:
    """Symmetric split-step integration over one span.

    Each step is linear half-step, nonlinear phase rotation over the whole
    step, linear half-step. Consecutive linear half-steps are merged, which is
    exact because the linear operator is diagonal in frequency.
    """
    steps = _steps(p.length_km, step_km or p.step_km)
    w2 = field.omega() ** 2
    alpha, beta2, gamma = p.alpha_np_m, p.beta2, p.gamma
    cache: dict[float, np.ndarray] = {}

    def lin(h: float) -> np.ndarray:
        if h not in cache:
            cache[h] = np.exp((-alpha / 2 + 0.5j * beta2 * w2) * h)
        return cache[h]

    spec = sfft.fft(field.data, axis=-1)
    spec *= lin(steps[0] / 2)
    for i, dz in enumerate(steps):
        t = sfft.ifft(spec, axis=-1, overwrite_x=True)
        if gamma:
            t = _nonlinear_phase(t, gamma * _effective_length(alpha, dz), model)
        spec = sfft.fft(t, axis=-1, overwrite_x=True)
        if i + 1 < len(steps):
            spec *= lin(dz / 2) * lin(steps[i + 1] / 2) if dz != steps[i + 1] else lin(dz)
        else:
            spec *= lin(dz / 2)
    return field.with_data(sfft.ifft(spec, axis=-1))


def dispersion_response(field: SampledField, accumulated_ps_nm: float) -> np.ndarray:
    """Transfer function of ``accumulated_ps_nm`` of lossless fiber dispersion."""
    d_total = accumulated_ps_nm * 1e-3  # ps/nm -> s/m
    beta2_l = -d_total * field.center_wavelength**2 / (2 * math.pi * C_LIGHT)
    return np.exp(0.5j * beta2_l * field.omega() ** 2)


def apply_dispersion(field: SampledField, accumulated_ps_nm: float) -> SampledField:
    if accumulated_ps_nm == 0:
        return field.with_data(field.data.copy())
    h = dispersion_response(field, accumulated_ps_nm)
    return field.with_data(sfft.ifft(sfft.fft(field.data, axis=-1) * h, axis=-1))


def ideal_dcf(field: SampledField, accumulated_ps_nm: float) -> SampledField:
    """Exactly undo ``accumulated_ps_nm`` of dispersion; lossless and linear."""
    return apply_dispersion(field, -accumulated_ps_nm)


def amplify(field: SampledField, gain_db: float) -> SampledField:
    return field.with_data(field.data * 10 ** (gain_db / 20))


def ase_psd(spans: int, nf_db: float, gain_db: float, wavelength: float = 1550e-9) -> float:
    """Per-polarization ASE power spectral density in W/Hz."""
    f = 10 ** (nf_db / 10)
    g = 10 ** (gain_db / 10)
    nu = C_LIGHT / wavelength
    return max(spans * (f * g - 1) * H_PLANCK * nu / 2, 0.0)


def load_noise(
    field: SampledField,
    spans: int,
    nf_db: float,
    gain_db: float,
    rng: np.random.Generator,
) -> SampledField:
    """Add white circular Gaussian noise to each polarization."""
    if gain_db <= 0:
        raise ValueError("amplifier gain must be positive")
    var = ase_psd(spans, nf_db, gain_db, field.center_wavelength) * field.sample_rate
    if var == 0:
        return field.with_data(field.data.copy())
    noise = rng.standard_normal((2, 2, len(field)))
    noise = (noise[0] + 1j * noise[1]) * math.sqrt(var / 2)
    return field.with_data(field.data + noise)


def propagate_link(field: SampledField, cfg: LinkConfig) -> SampledField:
    """The noiseless part of the link: spans of fiber, DCF, amplifier."""
    out = field
    for _ in range(cfg.spans):
        out = propagate_span(out, cfg.span, cfg.nonlinear_model)
        if cfg.dcf:
            out = ideal_dcf(out, cfg.span.accumulated_dispersion)
        out = amplify(out, cfg.gain_db)
    return out


def receiver_noise(field: SampledField, cfg: LinkConfig, rng: np.random.Generator) -> SampledField:
    if not cfg.noise or cfg.loaded_spans == 0:
        return field.with_data(field.data.copy())
    return load_noise(field, cfg.loaded_spans, cfg.nf_db, cfg.gain_db, rng)


def run_link(field: SampledField, cfg: LinkConfig, rng: np.random.Generator) -> SampledField:
    return receiver_noise(propagate_link(field, cfg), cfg, rng)
