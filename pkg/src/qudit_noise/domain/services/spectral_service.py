"""Power-spectral-density estimation and noise-model fitting."""

import logging
import math
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal, stats
from scipy.optimize import least_squares

from qudit_noise.domain.exceptions import DataError, FitError
from qudit_noise.domain.value_objects.processes import RamseyTrace, SpectroscopyTrace
from qudit_noise.domain.value_objects.spectra import (
    DwellEstimate,
    LorentzianFit,
    PowerLawFit,
    PsdEstimate,
    PsdMethod,
    SegmentConfig,
)

logger = logging.getLogger(__name__)

MIN_PSD_SAMPLES = 16
MIN_POWER_LAW_BINS = 8
KNEE_RESTART_FACTORS = (1.0, 0.3, 3.0)


class SpectralService:
    """PSD estimator plus Lorentzian and power-law fits."""

    def __init__(self, max_fit_evaluations: int = 2000) -> None:
        """Initialize the service.

        Args:
            max_fit_evaluations: Function-evaluation cap per least-squares start.
        """
        self.max_fit_evaluations = max_fit_evaluations

    def psd(
        self,
        series: ArrayLike,
        sample_interval: float,
        segmenting: Optional[SegmentConfig] = None,
    ) -> PsdEstimate:
        """Estimate the one-sided PSD of an evenly sampled series.

        The DC bin is dropped and the mean removed, so ``integrated_power``
        approximates the series variance (exactly for the boxcar periodogram,
        up to window leakage for Welch averaging).

        Args:
            series: Evenly sampled values.
            sample_interval: Sample spacing in seconds.
            segmenting: Estimator settings; defaults to Hann Welch averaging.

        Returns:
            The PsdEstimate.

        Raises:
            DataError: If the series is too short, contains NaN or the interval is invalid.
        """
        x = np.asarray(series, dtype=np.float64)
        if x.ndim != 1 or x.size < MIN_PSD_SAMPLES:
            raise DataError(f"PSD needs at least {MIN_PSD_SAMPLES} samples, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise DataError("Series contains NaN or infinite values")
        if not sample_interval > 0:
            raise DataError("sample_interval must be positive")
        cfg = segmenting or SegmentConfig()
        fs = 1.0 / sample_interval

        if cfg.method is PsdMethod.PERIODOGRAM or cfg.nperseg is None:
            freqs, values = signal.periodogram(
                x, fs=fs, window=cfg.window, detrend="constant", scaling="density"
            )
            segments = 1
        else:
            nperseg = min(cfg.nperseg, x.size)
            noverlap = int(nperseg * cfg.overlap)
            freqs, values = signal.welch(
                x,
                fs=fs,
                window=cfg.window,
                nperseg=nperseg,
                noverlap=noverlap,
                detrend="constant",
                scaling="density",
            )
            segments = 1 + (x.size - nperseg) // (nperseg - noverlap)

        return PsdEstimate(
            frequencies=freqs[1:],
            values=np.clip(values[1:], 0.0, None),
            method=cfg.method,
            segments=segments,
        )

    @staticmethod
    def resample_hold(
        times: ArrayLike, values: ArrayLike, interval: Optional[float] = None
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Resample an unevenly sampled series by holding the previous value.

        Args:
            times: Strictly increasing sample times.
            values: Samples.
            interval: Output spacing; defaults to the median input spacing.

        Returns:
            (grid, held values).
        """
        t = np.asarray(times, dtype=np.float64)
        v = np.asarray(values, dtype=np.float64)
        if t.size != v.size or t.size < 2:
            raise DataError("times and values must have equal length of at least 2")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise DataError("times must be strictly increasing")
        step = float(np.median(steps)) if interval is None else interval
        if not step > 0:
            raise DataError("interval must be positive")
        n = int(math.floor((t[-1] - t[0]) / step + 1e-9)) + 1
        grid = t[0] + step * np.arange(n)
        index = np.searchsorted(t, grid, side="right") - 1
        return grid, v[np.clip(index, 0, t.size - 1)]

    @staticmethod
    def rts_psd(frequencies: ArrayLike, flip_rate: float) -> NDArray[np.float64]:
        """One-sided PSD of a symmetric 0/1 telegraph signal.

        S(f) = (1/2) G / (G^2 + (pi f)^2) for switching rate G out of each
        state; a Lorentzian with A = 1 / (2 G) and knee f_c = G / pi.
        """
        f = np.asarray(frequencies, dtype=np.float64)
        return 0.5 * flip_rate / (flip_rate**2 + (math.pi * f) ** 2)

    def fit_lorentzian(
        self, psd: PsdEstimate, f_range: Optional[tuple[float, float]] = None
    ) -> LorentzianFit:
        """Fit S(f) = A / (1 + (f / f_c)^2) + B on log residuals.

        Residuals are weighted by 1/f so every decade contributes equally.
        The knee starts at the half-power crossing above the floor and the
        fit restarts at 0.3x and 3x that guess; the lowest cost wins.

        Args:
            psd: PSD to fit.
            f_range: Inclusive fit range; defaults to the lowest bin up to a
                quarter of the highest.

        Returns:
            LorentzianFit with delta-method covariance of (A, f_c, B).

        Raises:
            DataError: If fewer than 8 usable bins remain.
            FitError: If no start converges.
        """
        low, high = f_range or (float(psd.frequencies[0]), float(psd.frequencies[-1]) / 4.0)
        window = psd.restricted(low, high)
        usable = window.values > 0
        f = window.frequencies[usable]
        s = window.values[usable]
        if f.size < MIN_POWER_LAW_BINS:
            raise DataError(f"Lorentzian fit needs at least {MIN_POWER_LAW_BINS} positive bins")

        log_s = np.log(s)
        weights = np.sqrt(f[0] / f)

        def residuals(p: NDArray[np.float64]) -> NDArray[np.float64]:
            amp, knee, floor = np.exp(p)
            return weights * (np.log(amp / (1.0 + (f / knee) ** 2) + floor) - log_s)

        tail = max(1, f.size // 10)
        floor0 = max(float(np.median(s[-tail:])), 1e-300)
        amp0 = float(np.median(s[: max(1, f.size // 20)])) - floor0
        if amp0 <= 0:
            amp0 = float(s[0])
        above = np.flatnonzero(s - floor0 <= 0.5 * amp0)
        knee0 = float(f[above[0]]) if above.size else float(f[f.size // 2])

        costs: list[float] = []
        best = None
        for factor in KNEE_RESTART_FACTORS:
            start = np.log([amp0, knee0 * factor, floor0 * 0.5])
            result = least_squares(
                residuals,
                start,
                method="trf",
                x_scale="jac",
                xtol=1e-14,
                ftol=1e-14,
                gtol=1e-14,
                max_nfev=self.max_fit_evaluations,
            )
            costs.append(float(result.cost))
            logger.debug(f"Lorentzian start x{factor}: cost {result.cost:.3e}, {result.message}")
            if result.status > 0 and (best is None or result.cost < best.cost):
                best = result
        if best is None:
            raise FitError("Lorentzian fit did not converge from any start", history=costs)

        amp, knee, floor = (float(v) for v in np.exp(best.x))
        dof = max(f.size - 3, 1)
        scale = 2.0 * float(best.cost) / dof
        log_cov = scale * np.linalg.pinv(best.jac.T @ best.jac)
        jacobian = np.diag([amp, knee, floor])
        unweighted = best.fun / weights
        return LorentzianFit(
            amplitude=amp,
            knee_hz=knee,
            floor=floor,
            covariance=jacobian @ log_cov @ jacobian,
            residual_rms=float(np.sqrt(np.mean(unweighted**2))),
            fit_range=(float(f[0]), float(f[-1])),
        )

    @staticmethod
    def dwell_from_knee(fit: LorentzianFit) -> DwellEstimate:
        """Read the dwell time off a Lorentzian knee under every convention."""
        return DwellEstimate(knee_hz=fit.knee_hz)

    @staticmethod
    def fit_power_law(psd: PsdEstimate, f_range: tuple[float, float]) -> PowerLawFit:
        """Fit S(f) = amp_1hz * f^(-alpha) by linear regression in log10-log10 space.

        Args:
            psd: PSD to fit.
            f_range: Inclusive frequency range in Hz.

        Returns:
            PowerLawFit with log10 residuals and the count of excluded bins.

        Raises:
            DataError: If fewer than 8 positive bins fall in range.
        """
        window = psd.restricted(*f_range)
        positive = window.values > 0
        excluded = int(np.count_nonzero(~positive))
        if excluded:
            logger.warning(f"Excluded {excluded} nonpositive PSD bins from the power-law fit")
        if np.count_nonzero(positive) < MIN_POWER_LAW_BINS:
            raise DataError(
                f"Power-law fit needs at least {MIN_POWER_LAW_BINS} positive bins in "
                f"[{f_range[0]}, {f_range[1]}] Hz"
            )
        log_f = np.log10(window.frequencies[positive])
        log_s = np.log10(window.values[positive])
        regression = stats.linregress(log_f, log_s)
        fitted = regression.intercept + regression.slope * log_f
        return PowerLawFit(
            alpha=float(-regression.slope),
            amp_1hz=float(10.0**regression.intercept),
            fit_range=(float(f_range[0]), float(f_range[1])),
            residuals=log_s - fitted,
            excluded_bins=excluded,
        )

    @staticmethod
    def gen_power_law_noise(
        alpha: float, amp_1hz: float, n: int, sample_interval: float, seed: int
    ) -> NDArray[np.float64]:
        """Synthesize a series whose one-sided PSD is amp_1hz * f^(-alpha).

        A complex Gaussian spectrum is scaled by sqrt(S(f)) and inverse
        transformed; the DC bin is zero.

        Args:
            alpha: Spectral exponent in [0, 3].
            amp_1hz: PSD at 1 Hz.
            n: Number of samples.
            sample_interval: Sample spacing in seconds.
            seed: Random seed.

        Returns:
            The real series of length n.
        """
        if not 0.0 <= alpha <= 3.0:
            raise DataError("alpha must lie in [0, 3]")
        if n < 2 or not sample_interval > 0 or amp_1hz < 0:
            raise DataError("n >= 2, sample_interval > 0 and amp_1hz >= 0 are required")
        rng = np.random.default_rng(seed)
        freqs = np.fft.rfftfreq(n, sample_interval)
        target = np.zeros_like(freqs)
        target[1:] = amp_1hz * freqs[1:] ** (-alpha)
        scale = np.sqrt(target * n / (4.0 * sample_interval))
        spectrum = scale * (rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size))
        if n % 2 == 0:
            spectrum[-1] = math.sqrt(2.0) * spectrum[-1].real
        return np.fft.irfft(spectrum, n)

    @staticmethod
    def ramsey_beat_frequencies(trace: RamseyTrace, count: int = 2) -> NDArray[np.float64]:
        """Return the dominant |detunings| of a Ramsey trace, ascending, in Hz."""
        steps = np.diff(trace.delays)
        if steps.size < 2 or not np.allclose(steps, steps[0], rtol=1e-6):
            raise DataError("Ramsey delays must be evenly spaced")
        amplitude = np.abs(np.fft.rfft(trace.signal - trace.signal.mean()))
        freqs = np.fft.rfftfreq(trace.delays.size, float(steps[0]))
        peaks, _ = signal.find_peaks(amplitude)
        strongest = peaks[np.argsort(amplitude[peaks])[::-1][:count]]
        return np.sort(freqs[strongest])

    @staticmethod
    def find_spectroscopy_lines(
        trace: SpectroscopyTrace, count: int = 2, prominence: float = 0.1
    ) -> NDArray[np.float64]:
        """Locate spectroscopy line centres with quadratic peak interpolation, in GHz."""
        f = trace.frequencies_ghz
        y = trace.population
        peaks, props = signal.find_peaks(y, prominence=prominence)
        chosen = peaks[np.argsort(props["prominences"])[::-1][:count]]
        step = float(f[1] - f[0])
        centres = []
        for k in chosen:
            if 0 < k < y.size - 1:
                curvature = y[k - 1] - 2.0 * y[k] + y[k + 1]
                shift = 0.5 * (y[k - 1] - y[k + 1]) / curvature if curvature else 0.0
            else:
                shift = 0.0
            centres.append(f[k] + shift * step)
        return np.sort(np.asarray(centres, dtype=np.float64))
