import math

import numpy as np
import pytest

from sideband_tomo.gaussian import (
    GaussianTwoModeState, ModalBasis, TmstParams, change_basis, tmst_state, vacuum_state,
)
from sideband_tomo.traces import (
    HomodyneTrace, RawConfig, TraceConfig, demodulate, linear_ramp, lowpass_taps, raw_trace,
    synthesize_dual, synthesize_raw_photocurrent, synthesize_trace,
)

from conftest import SQUEEZED

SYM = ModalBasis.SYM_ANTISYM
VAC = vacuum_state(SYM)
SQ = change_basis(tmst_state(SQUEEZED))


def bin_values(trace, centre, half=math.pi / 100):
    d = np.angle(np.exp(1j * (trace.theta - centre)))
    return trace.x[(np.abs(d) <= half) | (np.abs(np.abs(d) - math.pi) <= half)]


def cfg(n=100_000, seed=3, **kw):
    return TraceConfig(n_samples=n, visibility=kw.pop("visibility", 1.0), rng_seed=seed, **kw)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"n_samples": 0}, {"visibility": 0.0}, {"visibility": 1.5},
                                    {"electronic_noise_var": -1.0}, {"rng_seed": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            TraceConfig(**kw)

    def test_defaults(self):
        c = TraceConfig()
        assert (c.n_samples, c.visibility, c.electronic_noise_var) == (100_000, 0.95, 0.0)

    def test_explicit_ramp_sets_count(self):
        c = TraceConfig(theta_ramp=[0.0, 1.0, 7.0])
        assert c.n_samples == 3
        assert np.allclose(c.thetas(), [0.0, 1.0, 7.0 - 2 * math.pi])

    def test_trace_rejects_out_of_range_theta(self):
        with pytest.raises(ValueError):
            HomodyneTrace(0.0, [0.0, 2 * math.pi], [1.0, 1.0])


class TestSynthesizeTrace:
    def test_determinism(self):
        a = synthesize_trace(SQ, 0.0, cfg(1000))
        b = synthesize_trace(SQ, 0.0, cfg(1000))
        c = synthesize_trace(SQ, 0.0, cfg(1000, seed=4))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.theta, b.theta)
        assert not np.array_equal(a.x, c.x)

    def test_theta_in_range_and_count(self):
        t = synthesize_trace(VAC, 0.3, cfg(777))
        assert t.n_samples == 777
        assert t.theta.min() >= 0 and t.theta.max() < 2 * math.pi

    @pytest.mark.parametrize("n", [1_000, 10_000, 100_000])
    def test_shot_noise_calibration(self, n):
        x = synthesize_trace(VAC, 0.0, cfg(n)).x
        assert abs(x.var() - 1.0) < 3 * math.sqrt(2 / n)

    @pytest.mark.slow
    def test_shot_noise_error_scaling(self):
        for n in (1_000, 10_000, 100_000):
            vs = [synthesize_trace(VAC, 0.0, cfg(n, seed=s)).x.var() for s in range(40)]
            # chi-square spread of 40 replicas: the std itself is uncertain by ~11 %
            assert np.std(vs, ddof=1) == pytest.approx(math.sqrt(2 / n), rel=0.35)

    def test_squeezed_min_bin_variance(self):
        t = synthesize_trace(SQ, 0.0, cfg())
        centres = np.linspace(0, math.pi, 50, endpoint=False)
        vs = [bin_values(t, c).var() for c in centres]
        k = int(np.argmin(vs))
        n_bin = bin_values(t, centres[k]).size
        assert centres[k] == pytest.approx(math.pi / 2, abs=0.1)
        assert vs[k] == pytest.approx(0.5004, abs=4 * 0.5 * math.sqrt(2 / n_bin) + 0.01)

    def test_coherent_mean_curve(self):
        state = change_basis(tmst_state(TmstParams(alpha=1.0)))
        t = synthesize_trace(state, 0.0, cfg())
        design = np.column_stack([np.cos(t.theta), np.sin(t.theta)])
        coef, *_ = np.linalg.lstsq(design, t.x, rcond=None)
        se = math.sqrt(2 / t.n_samples)
        assert coef == pytest.approx([2.0, 0.0], abs=4 * se)

    def test_visibility_keeps_vacuum_at_shot_noise(self):
        x = synthesize_trace(VAC, 0.0, cfg(visibility=0.5)).x
        assert abs(x.var() - 1.0) < 4 * math.sqrt(2 / x.size)

    def test_visibility_lifts_squeezed_variance(self):
        eta = 0.8
        t = synthesize_trace(SQ, 0.0, cfg(200_000, visibility=eta))
        vals = bin_values(t, math.pi / 2, half=0.05)
        v = SQ.cm[1, 1]
        expected = eta * v + (1 - eta)
        assert vals.var() == pytest.approx(expected, abs=4 * expected * math.sqrt(2 / vals.size) + 0.005)

    def test_electronic_noise_adds(self):
        x = synthesize_trace(VAC, 0.0, cfg(electronic_noise_var=0.5)).x
        assert abs(x.var() - 1.5) < 4 * 1.5 * math.sqrt(2 / x.size)

    def test_rejects_wrong_basis_and_unphysical(self):
        with pytest.raises(ValueError):
            synthesize_trace(vacuum_state(), 0.0, cfg(10))
        bad = GaussianTwoModeState(np.zeros(4), 0.5 * np.eye(4), SYM)
        with pytest.raises(ValueError):
            synthesize_trace(bad, 0.0, cfg(10))


class TestSynthesizeDual:
    def test_shared_ramp_and_vacuum_uncorrelated(self):
        a, b = synthesize_dual(VAC, 0.0, cfg())
        assert np.array_equal(a.theta, b.theta)
        assert b.psi == pytest.approx(math.pi / 2)
        r = np.corrcoef(a.x, b.x)[0, 1]
        assert abs(r) < 4 / math.sqrt(a.n_samples)

    def test_injected_epsilon(self):
        cm = np.eye(4) * 2.0
        cm[0, 2] = cm[2, 0] = 0.3
        state = GaussianTwoModeState(np.zeros(4), cm, SYM)
        s, a = synthesize_dual(state, 0.0, cfg(200_000))
        d = np.angle(np.exp(1j * s.theta))
        mask = (np.abs(d) < 0.05) | (np.abs(np.abs(d) - math.pi) < 0.05)
        cov = np.cov(s.x[mask], a.x[mask])[0, 1]
        # var of a product of two correlated N(0, 2) variables is 4 + 0.09
        se = math.sqrt(4.09 / mask.sum())
        assert cov == pytest.approx(0.3, abs=4 * se + 0.003)

    def test_marginals_match_single_trace_law(self):
        s, _ = synthesize_dual(SQ, 0.0, cfg())
        vals = bin_values(s, 0.0, half=0.05)
        assert vals.var() == pytest.approx(SQ.cm[0, 0], rel=4 * math.sqrt(2 / vals.size) + 0.01)

    def test_independent_electronic_noise(self):
        a, b = synthesize_dual(VAC, 0.0, cfg(electronic_noise_var=1.0))
        assert abs(np.corrcoef(a.x, b.x)[0, 1]) < 4 / math.sqrt(a.n_samples)
        assert a.x.var() == pytest.approx(2.0, rel=0.03)


RAW = RawConfig(duration=2e-3)


class TestRawConfig:
    def test_defaults(self):
        r = RawConfig()
        assert r.samples_per_window == 80
        assert r.n_windows == 6000
        assert r.omega / r.lowpass_cutoff == 10

    @pytest.mark.parametrize("kw", [{"sample_rate": 10e6}, {"lowpass_cutoff": 4e6},
                                    {"lowpass_cutoff": 7e5}, {"white_noise_var_per_sample": -1},
                                    {"duration": 1e-7}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            RawConfig(**kw)


class TestRawPhotocurrent:
    def test_window_structure(self):
        current = synthesize_raw_photocurrent(SQ, linear_ramp(RAW.duration), RAW)
        m = RAW.samples_per_window
        t = np.arange(m) / RAW.sample_rate
        wt = 2 * math.pi * RAW.omega * t
        basis = np.column_stack([2 * np.cos(wt), -2 * np.sin(wt)])
        for w in (0, 17, RAW.n_windows - 1):
            seg = current[w * m:(w + 1) * m]
            # window w starts at an integer number of omega periods
            coef, res, *_ = np.linalg.lstsq(basis, seg, rcond=None)
            assert np.allclose(basis @ coef, seg, atol=1e-12)

    def test_unit_amplitude_identity(self):
        # X_s = 1/2, X_a = 0 gives I(t) = cos(omega t); demodulation returns X_s
        n = RAW.n_points
        t = np.arange(n) / RAW.sample_rate
        current = np.cos(2 * math.pi * RAW.omega * t)
        tr = demodulate(current, RAW.sample_rate, RAW.omega, 0.0, RAW.lowpass_cutoff,
                        linear_ramp(RAW.duration), remove_dc=False)
        assert np.allclose(tr.x, 0.5, atol=1e-12)

    def test_spectral_peak_at_omega(self):
        current = synthesize_raw_photocurrent(SQ, linear_ramp(RAW.duration), RAW)
        power = np.abs(np.fft.rfft(current)) ** 2
        freqs = np.fft.rfftfreq(current.size, 1 / RAW.sample_rate)
        peak = freqs[np.argmax(power)]
        assert abs(peak - RAW.omega) <= 2 * RAW.lowpass_cutoff

    def test_determinism(self):
        a = synthesize_raw_photocurrent(VAC, linear_ramp(RAW.duration), RAW)
        b = synthesize_raw_photocurrent(VAC, linear_ramp(RAW.duration), RAW)
        assert np.array_equal(a, b)


class TestDemodulate:
    def _current(self, xs, xa):
        m = RAW.samples_per_window
        t = np.arange(xs.size * m) / RAW.sample_rate
        wt = 2 * math.pi * RAW.omega * t
        return 2 * np.repeat(xs, m) * np.cos(wt) - 2 * np.repeat(xa, m) * np.sin(wt)

    @pytest.mark.parametrize("psi", [0.0, math.pi / 2, math.pi / 4, -math.pi / 4])
    def test_recovers_mixer_combination(self, rng, psi):
        xs, xa = rng.normal(size=(2, RAW.n_windows))
        tr = demodulate(self._current(xs, xa), RAW.sample_rate, RAW.omega, psi,
                        RAW.lowpass_cutoff, linear_ramp(RAW.duration), remove_dc=False)
        assert np.allclose(tr.x, xs * math.cos(psi) + xa * math.sin(psi), atol=1e-12)

    def test_white_noise_bandwidth(self, rng):
        var_in = 3.0
        n = RAW.n_points * 10
        series = math.sqrt(var_in) * rng.standard_normal(n)
        tr = demodulate(series, RAW.sample_rate, RAW.omega, 0.3, RAW.lowpass_cutoff,
                        linear_ramp(n / RAW.sample_rate), remove_dc=False)
        taps = lowpass_taps(RAW.sample_rate, RAW.lowpass_cutoff)
        mix = np.cos(2 * math.pi * RAW.omega * np.arange(taps.size) / RAW.sample_rate + 0.3)
        expected = var_in * np.sum((taps[::-1] * mix) ** 2)
        assert tr.x.var() == pytest.approx(expected, rel=4 * math.sqrt(2 / tr.n_samples))

    def test_rejects_cutoff_above_omega(self):
        with pytest.raises(ValueError):
            demodulate(np.zeros(800), RAW.sample_rate, RAW.omega, 0.0, 4e6, linear_ramp(1.0))

    def test_vacuum_calibration(self):
        raw = RawConfig(duration=20e-3, rng_seed=9)
        tr = raw_trace(VAC, 0.0, raw)
        assert tr.n_samples == raw.n_windows
        assert abs(tr.x.var() - 1.0) < 4 * math.sqrt(2 / tr.n_samples)
