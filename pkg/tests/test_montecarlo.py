import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from setpart8d.channel import LinkConfig, SpanParams, ase_psd
from setpart8d.formats import FormatKind, build_format
from setpart8d.montecarlo import (
    CSV_COLUMNS,
    FLAG_ERROR_FREE,
    FLAG_UPPER_BOUND,
    Axis,
    BerRecord,
    SimConfig,
    ber_from_q2,
    q2_from_ber,
    reach_at_threshold,
    read_csv,
    run_point,
    sweep_power,
    sweep_reach,
    sweeps_to_csv,
)


def q_bisect(ber):
    # independent oracle: solve 0.5 erfc(q / sqrt 2) = ber by bisection
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if 0.5 * math.erfc(mid / math.sqrt(2)) > ber:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def tiny(kind=FormatKind.PDM_QPSK, **kw):
    base = dict(
        format=kind,
        sps=4,
        rrc_span=32,
        channels=1,
        seq_log2=11,
        training_symbols=256,
        link=LinkConfig(spans=0, noise_spans=60),
        power_dbm=-6.0,
        seed=5,
        min_errors=100,
        realization_cap=8,
    )
    base.update(kw)
    return SimConfig(**base)


def awgn_power_dbm(snr_db, cfg):
    # per-polarization SNR = (P / 2) / (N_ase * baud)
    psd = ase_psd(cfg.link.loaded_spans, cfg.link.nf_db, cfg.link.gain_db)
    return 10 * math.log10(2 * 10 ** (snr_db / 10) * psd * cfg.baud / 1e-3)


class TestQ2:
    @pytest.mark.parametrize(
        "ber, q2_db",
        [(1e-3, 9.80), (0.1587, 0.0), (0.0394, 4.90), (3.8e-3, 8.53)],
    )
    def test_examples(self, ber, q2_db):
        assert q2_from_ber(ber) == pytest.approx(q2_db, abs=0.01)

    @given(st.floats(1e-12, 0.49))
    def test_matches_bisection(self, ber):
        assert q2_from_ber(ber) == pytest.approx(20 * math.log10(q_bisect(ber)), abs=1e-8)

    @given(st.floats(-5, 20))
    def test_inverse(self, q2):
        assert q2_from_ber(ber_from_q2(q2)) == pytest.approx(q2, abs=1e-8)

    @pytest.mark.parametrize("ber", [0.5, 0.7])
    def test_no_gain(self, ber):
        with pytest.raises(ValueError, match="no decision gain"):
            q2_from_ber(ber)

    def test_zero_ber(self):
        with pytest.raises(ValueError):
            q2_from_ber(0.0)

    def test_record_properties(self):
        assert BerRecord(1000, 0, 1, FLAG_ERROR_FREE).q2_db == math.inf
        assert math.isnan(BerRecord(0, 0, 0, "failed").q2_db)
        assert BerRecord(1000, 1, 1).ber == 1e-3


class TestRecordLength:
    @pytest.mark.parametrize(
        "kind, blocks",
        [
            (FormatKind.PDM_QPSK, 1 << 14),
            (FormatKind.PB_5B8D, 1 << 14),
            (FormatKind.PA_7B8D, 1 << 14),
            (FormatKind.PDM_BPSK, 1 << 15),
        ],
    )
    def test_blocks_at_2_16(self, kind, blocks):
        assert SimConfig(format=kind).n_blocks(build_format(kind)) == blocks

    def test_qpsk_samples(self):
        cfg = SimConfig()
        # two slots per block, 64 samples per slot
        assert cfg.n_blocks(build_format(FormatKind.PDM_QPSK)) * 2 * cfg.sps == 2_097_152

    def test_validation(self):
        with pytest.raises(ValueError, match="odd"):
            SimConfig(channels=2)
        with pytest.raises(ValueError):
            SimConfig(min_errors=0)

    def test_training_longer_than_record(self):
        with pytest.raises(ValueError, match="training"):
            run_point(tiny(seq_log2=8))


class TestRunPoint:
    @pytest.mark.parametrize("kind", list(FormatKind)[:4])
    def test_back_to_back_error_free(self, kind):
        rec = run_point(tiny(kind, link=LinkConfig(spans=0, noise=False)))
        assert rec.bit_errors == 0 and rec.realizations == 1
        assert rec.flagged == FLAG_ERROR_FREE

    def test_info_bits_only(self):
        cfg = tiny(FormatKind.PB_5B8D, link=LinkConfig(spans=0, noise=False))
        rec = run_point(cfg)
        skip = cfg.training_symbols // 2
        assert rec.bits_compared == (cfg.n_blocks(build_format(FormatKind.PB_5B8D)) - skip) * 5

    def test_stops_at_min_errors(self):
        cfg = tiny(power_dbm=-14.0, min_errors=50)
        rec = run_point(cfg)
        assert rec.bit_errors >= 50 and rec.realizations == 1 and rec.flagged is None

    def test_cap_gives_upper_bound(self):
        cfg = tiny(power_dbm=-4.0, min_errors=10**6, realization_cap=2)
        rec = run_point(cfg)
        assert rec.realizations == 2 and rec.flagged == FLAG_UPPER_BOUND

    def test_deterministic(self):
        cfg = tiny(power_dbm=-12.0)
        assert run_point(cfg) == run_point(cfg)

    def test_seed_matters(self):
        cfg = tiny(power_dbm=-12.0)
        assert run_point(cfg) != run_point(replace(cfg, seed=6))

    def test_awgn_matches_theory(self):
        cfg = tiny(seq_log2=14, training_symbols=1024, min_errors=2000, realization_cap=32)
        p = awgn_power_dbm(7.3, cfg)
        rec = run_point(replace(cfg, power_dbm=p))
        assert rec.bit_errors >= 2000
        assert rec.q2_db == pytest.approx(7.3, abs=0.25)


class TestSweeps:
    def test_low_power_slope(self):
        # linear regime: Q^2 tracks launch power dB for dB
        cfg = tiny(
            seq_log2=13,
            training_symbols=512,
            min_errors=2000,
            link=LinkConfig(spans=1, span=SpanParams(step_km=5.0), noise_spans=60),
        )
        s = sweep_power(cfg, [-14.0, -13.0, -12.0])
        slope = np.diff(s.q2()) / np.diff(s.values())
        np.testing.assert_allclose(slope, 1.0, atol=0.2)

    def test_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            sweep_power(tiny(), [-5.0, -6.0])
        with pytest.raises(ValueError):
            sweep_power(tiny(), [])

    def test_failed_point_flagged(self):
        s = sweep_power(tiny(seq_log2=8), [-6.0])
        assert s.points[0][1].flagged.startswith("failed")

    def test_reach_axis(self):
        cfg = tiny(link=LinkConfig(spans=0, span=SpanParams(step_km=25.0), noise=False))
        s = sweep_reach(cfg, [0, 1])
        assert s.axis is Axis.SPANS
        np.testing.assert_array_equal(s.distances_km(), [0.0, 75.0])
        assert all(r.bit_errors == 0 for _, r in s.points)

    def test_csv(self):
        cfg = tiny(power_dbm=-12.0)
        text = sweeps_to_csv([sweep_power(cfg, [-13.0, -12.0])])
        rows = read_csv(text)
        assert list(rows[0]) == CSV_COLUMNS
        assert [r["axis_value"] for r in rows] == ["-13", "-12"]
        assert text == sweeps_to_csv([sweep_power(cfg, [-13.0, -12.0])])

    def test_common_random_numbers(self):
        # same data and noise at every power: errors shrink monotonically
        cfg = tiny(min_errors=10**6, realization_cap=1)
        s = sweep_power(cfg, [-14.0, -13.0, -12.0, -11.0])
        errs = [r.bit_errors for _, r in s.points]
        assert errs == sorted(errs, reverse=True)


class TestReach:
    def test_example(self):
        assert reach_at_threshold([4500, 4575], [5.0, 4.8], 4.9) == pytest.approx(4537.5)

    def test_first_crossing(self):
        d = [1000, 2000, 3000, 4000]
        assert reach_at_threshold(d, [8.0, 6.0, 4.0, 3.0], 5.0) == pytest.approx(2500.0)

    def test_not_bracketed(self):
        with pytest.raises(ValueError, match="not bracketed"):
            reach_at_threshold([1000, 2000], [6.0, 5.5], 4.9)

    def test_skips_infinite(self):
        assert reach_at_threshold([0, 75, 150, 225], [math.inf, 6.0, 5.0, 4.0], 4.5) == pytest.approx(187.5)
