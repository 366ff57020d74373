import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from setpart8d.formats import FormatKind
from setpart8d.waveform import (
    EqualizerConfig,
    EqualizerDiverged,
    PulseShapeSpec,
    SampledField,
    channel_offsets,
    channel_select,
    circular_filter,
    equalize,
    frequency_shift,
    from_slots,
    launch_amplitude,
    pulse_shape,
    rrc_taps,
    to_slots,
    wdm_mux,
)

SPEC16 = PulseShapeSpec(sps=16, span=64)
GRID = 37.5e9


def mse_db(a, b):
    return 10 * math.log10(np.mean(np.abs(a - b) ** 2))


@pytest.fixture(scope="module")
def qpsk_points(fmt):
    c = fmt[FormatKind.PDM_QPSK]
    return c.points[np.random.default_rng(21).integers(0, 256, 2048)]


def raised_cosine_bw(fraction, baud, beta):
    """Two-sided bandwidth holding ``fraction`` of a raised-cosine PSD, by quadrature."""
    f = np.linspace(0, baud * (1 + beta) / 2, 200_001)
    f1 = baud * (1 - beta) / 2
    psd = np.where(f <= f1, 1.0, 0.5 * (1 + np.cos(np.pi / (beta * baud) * (f - f1))))
    cum = np.cumsum(psd)
    return 2 * f[np.searchsorted(cum / cum[-1], fraction)]


def rx_2sps(points, spec=SPEC16, power_dbm=0.0):
    return channel_select(pulse_shape(points, spec, power_dbm), 0, GRID, spec)


class TestRRC:
    @pytest.mark.parametrize("rolloff", [0.1, 0.25, 1.0])
    def test_shape(self, rolloff):
        spec = PulseShapeSpec(rolloff=rolloff, sps=8, span=16)
        h = rrc_taps(spec)
        assert len(h) == 16 * 8 + 1
        np.testing.assert_allclose(h, h[::-1], atol=1e-15)
        assert np.sum(h**2) == pytest.approx(1.0, abs=1e-12)
        assert np.argmax(h) == len(h) // 2

    def test_singular_points_finite(self):
        # 4 beta t = 1 lands on the grid for beta = 0.25, sps = 8
        h = rrc_taps(PulseShapeSpec(rolloff=0.25, sps=8, span=8))
        assert np.all(np.isfinite(h))

    @pytest.mark.parametrize("span", [32, 64])
    def test_nyquist_isi(self, span):
        spec = PulseShapeSpec(sps=8, span=span)
        h = rrc_taps(spec)
        # raised cosine by linear convolution, an independent route from the circular filter
        g = np.convolve(h, h)
        center = len(g) // 2
        samples = g[center % spec.sps :: spec.sps]
        peak = g[center]
        isi = np.sum(samples**2) - peak**2
        assert 10 * math.log10(isi / peak**2) <= -40

    def test_bad_specs(self):
        with pytest.raises(ValueError):
            PulseShapeSpec(sps=3)
        with pytest.raises(ValueError):
            PulseShapeSpec(rolloff=0.0)


class TestSlots:
    def test_round_trip(self, qpsk_points):
        np.testing.assert_array_equal(from_slots(to_slots(qpsk_points)), qpsk_points)

    def test_layout(self):
        p = np.arange(8.0)
        s = to_slots(p)
        np.testing.assert_array_equal(s, [[0 + 1j, 4 + 5j], [2 + 3j, 6 + 7j]])

    def test_odd_slots(self):
        with pytest.raises(ValueError):
            from_slots(np.zeros((2, 3)))


class TestPulseShape:
    @pytest.mark.parametrize("power_dbm", [-10.0, -3.0, 2.0])
    def test_power(self, qpsk_points, power_dbm):
        spec = PulseShapeSpec(sps=8, span=64)
        f = pulse_shape(qpsk_points, spec, power_dbm)
        assert abs(f.power_dbm() - power_dbm) <= 0.01

    def test_amplitude_formula(self):
        assert launch_amplitude(0.0, 64) == pytest.approx(math.sqrt(1e-3 * 32))

    @pytest.fixture(scope="class")
    @staticmethod
    def spectrum(qpsk_points):
        spec = PulseShapeSpec(sps=8, span=64)
        f = pulse_shape(qpsk_points, spec, 0.0)
        psd = np.sum(np.abs(np.fft.fft(f.data, axis=-1)) ** 2, axis=0)
        freqs = np.fft.fftfreq(len(f), 1 / f.sample_rate)
        order = np.argsort(freqs)
        return freqs[order], psd[order]

    def test_occupied_band_edge(self, spectrum):
        freqs, psd = spectrum
        smooth = np.convolve(psd, np.ones(16) / 16, mode="same")
        flat = np.median(smooth[np.abs(freqs) < 10e9])
        edge = 2 * np.max(np.abs(freqs[smooth > 1e-3 * flat]))
        assert edge == pytest.approx(35.2e9, rel=0.05)

    def test_99_percent_bandwidth(self, spectrum):
        freqs, psd = spectrum
        order = np.argsort(np.abs(freqs))
        cum = np.cumsum(psd[order]) / psd.sum()
        bw99 = 2 * np.abs(freqs[order][np.searchsorted(cum, 0.99)])
        assert bw99 == pytest.approx(raised_cosine_bw(0.99, 32e9, 0.1), rel=0.02)

    def test_back_to_back(self, qpsk_points):
        rx = rx_2sps(qpsk_points).data[:, ::2] / launch_amplitude(0.0, 16)
        assert np.sqrt(np.mean(np.abs(rx - to_slots(qpsk_points)) ** 2)) <= 1e-3

    @given(st.floats(0.1, 10), st.floats(-0.5, 0.5))
    def test_linear(self, alpha, phase):
        pts = np.random.default_rng(1).choice([-1, 1], (64, 8)) / math.sqrt(2)
        spec = PulseShapeSpec(sps=4, span=16)
        a = pulse_shape(pts, spec, 0.0).data
        b = pulse_shape(pts * alpha, spec, 0.0).data
        np.testing.assert_allclose(b, alpha * a, atol=1e-12)
        z = np.exp(1j * phase)
        c = channel_select(SampledField(a * z, spec.sample_rate), 0, GRID, spec).data
        d = channel_select(SampledField(a, spec.sample_rate), 0, GRID, spec).data
        np.testing.assert_allclose(c, z * d, atol=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            pulse_shape(np.zeros((0, 8)), SPEC16, 0.0)


class TestWDM:
    @pytest.fixture(scope="class")
    @staticmethod
    def comb(fmt):
        spec = PulseShapeSpec(sps=64, span=64)
        c = fmt[FormatKind.PDM_QPSK]
        rng = np.random.default_rng(8)
        pts = [c.points[rng.integers(0, 256, 512)] for _ in range(5)]
        fields = [pulse_shape(p, spec, -3.0) for p in pts]
        return spec, pts, fields

    def test_single_channel_identity(self, comb):
        spec, _, fields = comb
        np.testing.assert_array_equal(wdm_mux(fields[:1], GRID, spec).data, fields[0].data)

    def test_total_power(self, comb):
        spec, _, fields = comb
        total = wdm_mux(fields, GRID, spec).power()
        assert 10 * math.log10(total / sum(f.power() for f in fields)) == pytest.approx(0, abs=0.05)

    def test_select_each_channel(self, comb):
        spec, pts, fields = comb
        mux = wdm_mux(fields, GRID, spec)
        amp = launch_amplitude(-3.0, spec.sps)
        for k, p in zip(channel_offsets(5), pts):
            rx = channel_select(mux, k, GRID, spec).data[:, ::2] / amp
            assert mse_db(rx, to_slots(p)) <= -30

    def test_leakage_into_neighbor(self, comb):
        spec, _, fields = comb
        # channel +1 alone versus everything except channel +1
        alone = [f if k == 1 else f.with_data(np.zeros_like(f.data)) for k, f in zip(channel_offsets(5), fields)]
        others = [f.with_data(np.zeros_like(f.data)) if k == 1 else f for k, f in zip(channel_offsets(5), fields)]
        sig = channel_select(wdm_mux(alone, GRID, spec), 1, GRID, spec).power()
        leak = channel_select(wdm_mux(others, GRID, spec), 1, GRID, spec).power()
        assert 10 * math.log10(sig / leak) >= 30

    def test_selected_energy_parseval(self, comb):
        spec, _, fields = comb
        mux = wdm_mux(fields, GRID, spec)
        # matched filter passes the raised-cosine PSD weighted by itself again:
        # gain sps * int(RC^2) / int(RC) = sps * (1 - rolloff / 4)
        e = channel_select(mux, -2, GRID, spec).energy()
        expect = spec.sps * (1 - spec.rolloff / 4) * fields[0].energy()
        assert 10 * math.log10(e / expect) == pytest.approx(0, abs=0.02)

    def test_rejects_even_count(self, comb):
        spec, _, fields = comb
        with pytest.raises(ValueError, match="odd"):
            wdm_mux(fields[:2], GRID, spec)

    def test_rejects_aliasing(self, fmt):
        spec = PulseShapeSpec(sps=4, span=16)
        f = pulse_shape(fmt[FormatKind.PDM_QPSK].points[:32], spec, 0.0)
        with pytest.raises(ValueError, match="aliases"):
            wdm_mux([f] * 5, GRID, spec)

    @given(st.floats(-100e9, 100e9))
    def test_shift_inverse(self, shift):
        rng = np.random.default_rng(2)
        f = SampledField(rng.standard_normal((2, 256)) + 1j * rng.standard_normal((2, 256)), 512e9)
        back = frequency_shift(frequency_shift(f, shift), -shift)
        np.testing.assert_allclose(back.data, f.data, atol=1e-12)

    def test_offsets(self):
        assert channel_offsets(5).tolist() == [-2, -1, 0, 1, 2]


class TestCircularFilter:
    def test_matches_periodic_convolution(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(64) + 0j
        h = rng.standard_normal(9)
        # direct periodic convolution with a centered kernel
        direct = np.array([sum(h[j] * x[(n - (j - 4)) % 64] for j in range(9)) for n in range(64)])
        np.testing.assert_allclose(circular_filter(x, h), direct, atol=1e-12)


class TestEqualizer:
    CFG = EqualizerConfig()

    def run(self, rx, slots, cfg=None):
        cfg = cfg or self.CFG
        return equalize(rx, slots[:, : cfg.training_symbols], cfg, return_taps=True)

    def test_identity_channel(self, qpsk_points):
        slots = to_slots(qpsk_points)
        out, w = self.run(rx_2sps(qpsk_points), slots)
        assert mse_db(out, slots) <= -30
        cross = np.sum(np.abs(w[0, 1]) ** 2) + np.sum(np.abs(w[1, 0]) ** 2)
        assert 10 * math.log10(cross / np.sum(np.abs(w) ** 2)) <= -30

    @pytest.mark.parametrize("theta", [0.3, np.pi / 2])
    def test_rotation(self, qpsk_points, theta):
        slots = to_slots(qpsk_points)
        rx = rx_2sps(qpsk_points)
        u = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        out, _ = self.run(rx.with_data(u @ rx.data), slots)
        assert mse_db(out, slots) <= -30

    @pytest.mark.parametrize("delay", [1, -2, 3])
    def test_time_offset(self, qpsk_points, delay):
        slots = to_slots(qpsk_points)
        rx = rx_2sps(qpsk_points)
        out, _ = self.run(rx.with_data(np.roll(rx.data, delay, axis=1)), slots)
        assert mse_db(out, slots) <= -25

    def test_scale_invariant(self, qpsk_points):
        slots = to_slots(qpsk_points)
        rx = rx_2sps(qpsk_points)
        a, _ = self.run(rx, slots)
        b, _ = self.run(rx.with_data(rx.data * 37.0), slots)
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_white_noise_input(self, qpsk_points):
        slots = to_slots(qpsk_points)
        rng = np.random.default_rng(4)
        noise = SampledField(rng.standard_normal((2, 8192)) + 1j * rng.standard_normal((2, 8192)), 64e9)
        try:
            out, _ = self.run(noise, slots)
        except EqualizerDiverged:
            return
        # no information: output error stays at the signal power floor
        floor = 10 * math.log10(np.mean(np.abs(slots) ** 2))
        assert abs(mse_db(out, slots) - floor) <= 1.0

    def test_huge_step_diverges(self, qpsk_points):
        slots = to_slots(qpsk_points)
        cfg = EqualizerConfig(step_size=5.0, passes=1)
        with pytest.raises(EqualizerDiverged):
            self.run(rx_2sps(qpsk_points), slots, cfg)

    def test_zero_input(self, qpsk_points):
        slots = to_slots(qpsk_points)
        with pytest.raises(EqualizerDiverged):
            self.run(SampledField(np.zeros((2, 4096)), 64e9), slots)

    def test_training_shape(self, qpsk_points):
        with pytest.raises(ValueError):
            equalize(rx_2sps(qpsk_points), np.zeros((2, 10)), self.CFG)

    def test_even_taps(self):
        with pytest.raises(ValueError):
            EqualizerConfig(taps=10)
