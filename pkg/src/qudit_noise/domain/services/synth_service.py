"""Seeded generators for every synthetic dataset the pipelines consume."""

import bisect
import logging
import math
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm

from qudit_noise.domain.exceptions import DataError
from qudit_noise.domain.value_objects.processes import (
    ChargeEnvConfig,
    ChargeTrace,
    ParityPath,
    ParityProcessConfig,
    RamseyTrace,
    RelaxationTrace,
    SpectroscopyTrace,
)
from qudit_noise.domain.value_objects.readout import (
    IqClusterModel,
    ResetBoundaries,
    ResetPulse,
    ShotRecord,
    ShotTable,
    TargetBand,
)
from qudit_noise.domain.value_objects.transmon import ParityBands, fold_offset

logger = logging.getLogger(__name__)

DEVICE_T1_S = 247e-6
DEVICE_T2_STAR_S = 31e-6
SPECTROSCOPY_PULSE_S = 40e-6
# Two parity lines closer than this are not resolved by 40 us spectroscopy.
RESOLVABLE_SEPARATION_HZ = 25e3


class SynthService:
    """Deterministic, seedable generators.

    Every method builds its own ``numpy.random.Generator`` from the seed it is
    given, so identical (config, seed) pairs give bit-identical output and
    independent calls can run concurrently.
    """

    def gen_parity_path(self, cfg: ParityProcessConfig) -> ParityPath:
        """Draw a symmetric parity telegraph path with exponential dwell times.

        Args:
            cfg: Process configuration; ``cfg.seed`` fixes the path.

        Returns:
            The ParityPath over [0, cfg.duration].
        """
        rng = np.random.default_rng([cfg.seed, 0])
        initial = int(rng.integers(2))
        expected = cfg.duration / cfg.dwell_time
        batch = int(expected + 10.0 * math.sqrt(expected) + 16)
        arrivals = np.cumsum(rng.exponential(cfg.dwell_time, size=batch))
        while arrivals[-1] < cfg.duration:
            more = arrivals[-1] + np.cumsum(rng.exponential(cfg.dwell_time, size=batch))
            arrivals = np.concatenate([arrivals, more])
        flips = arrivals[arrivals < cfg.duration]
        logger.debug(f"Parity path: {flips.size} flips over {cfg.duration} s")
        return ParityPath(flip_times=flips, initial_parity=initial, duration=cfg.duration)

    @staticmethod
    def _read_out(
        true_states: NDArray[np.int64], model: IqClusterModel, rng: np.random.Generator
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        cumulative = np.cumsum(model.error_matrix, axis=1)
        draws = rng.random(true_states.size)
        observed = np.minimum(
            (draws[:, None] >= cumulative[true_states]).sum(axis=1), model.n_states - 1
        )
        iq = np.empty((true_states.size, 2))
        for state in range(model.n_states):
            rows = np.flatnonzero(observed == state)
            if rows.size:
                iq[rows] = rng.multivariate_normal(
                    model.means[state], model.covariances[state], size=rows.size, method="eigh"
                )
        return iq[:, 0], iq[:, 1]

    def gen_parity_shots(
        self, path: ParityPath, cluster_model: IqClusterModel, cfg: ParityProcessConfig
    ) -> ShotTable:
        """Sample interleaved even/odd-band probe shots along a parity path.

        The even-band probe of cycle k fires at k * duty_cycle and the odd-band
        probe half a cycle later. A probe whose band matches the current
        parity drives the qudit to |2>; otherwise it stays in |0>. IQ points
        come from the cluster of the state read out through the error matrix.

        Args:
            path: Parity path covering the run.
            cluster_model: Readout clusters and error matrix.
            cfg: Process configuration (duty cycle, duration, seed).

        Returns:
            ShotTable with truth states.

        Raises:
            DataError: If the path does not cover the run.
        """
        cycles = np.arange(cfg.n_cycles, dtype=np.float64) * cfg.duty_cycle
        times = np.column_stack([cycles, cycles + 0.5 * cfg.duty_cycle]).ravel()
        if times.size and times[-1] > path.duration:
            raise DataError(f"Parity path ends at {path.duration} s before the last shot")
        bands = np.tile(np.array([0, 1], dtype=np.int64), cfg.n_cycles)
        true_states = np.where(bands == path.parity_at(times), 2, 0).astype(np.int64)
        rng = np.random.default_rng([cfg.seed, 1])
        i_volt, q_volt = self._read_out(true_states, cluster_model, rng)
        if cfg.undersampled:
            logger.warning(
                f"Duty cycle {cfg.duty_cycle} s is not shorter than the dwell time "
                f"{cfg.dwell_time} s; parity flips will be missed"
            )
        return ShotTable(t=times, i_volt=i_volt, q_volt=q_volt, band=bands, truth_state=true_states)

    def gen_charge_trace(
        self,
        cfg: ChargeEnvConfig,
        temperature: float,
        matrix: Optional[NDArray[np.float64]] = None,
    ) -> ChargeTrace:
        """Sample a configuration Markov chain and its noisy offset-charge readout.

        Args:
            cfg: Environment configuration.
            temperature: One of ``cfg.temperatures``, kelvin.
            matrix: Explicit transition matrix overriding the rate model.

        Returns:
            Folded ChargeTrace with ground-truth configuration labels.

        Raises:
            DataError: If the temperature is not configured or the matrix is not stochastic.
        """
        if not any(math.isclose(temperature, t) for t in cfg.temperatures):
            raise DataError(f"Temperature {temperature} K is not in the configured list")
        transitions = cfg.transition_matrix(temperature) if matrix is None else np.asarray(matrix)
        n = cfg.n_states
        if (
            transitions.shape != (n, n)
            or np.any(transitions < 0)
            or not np.allclose(transitions.sum(axis=1), 1.0, atol=1e-9)
        ):
            raise DataError("Transition matrix must be row-stochastic over the configurations")

        seed_index = int(round(temperature * 1e6))
        rng = np.random.default_rng([cfg.seed, 2, seed_index])
        n_samples = cfg.n_samples
        draws = rng.random(n_samples)
        cumulative = np.cumsum(transitions, axis=1).tolist()
        labels = np.empty(n_samples, dtype=np.int64)
        state = int(rng.integers(n))
        for step in range(n_samples):
            if step:
                state = min(bisect.bisect_right(cumulative[state], draws[step]), n - 1)
            labels[step] = state

        clip = cfg.noise_clip
        noise = np.clip(rng.normal(0.0, cfg.noise_sigma, size=n_samples), -clip, clip)
        offsets = np.asarray(cfg.offsets)
        q = fold_offset(offsets[labels] + noise)
        times = np.arange(n_samples, dtype=np.float64) * cfg.sample_interval
        logger.info(
            f"Charge trace at {temperature * 1e3:.0f} mK: {n_samples} samples, "
            f"{int(np.count_nonzero(np.diff(labels)))} configuration changes"
        )
        return ChargeTrace(times=times, q=q, temperature=temperature, truth_labels=labels)

    def gen_spectroscopy_trace(
        self,
        bands: ParityBands,
        q: float,
        pulse_len: float,
        grid_ghz: ArrayLike,
        noise: float = 0.0,
        seed: int = 0,
    ) -> SpectroscopyTrace:
        """Two Lorentzian parity lines at f+/-(q) with FWHM 1 / (pi pulse_len).

        Args:
            bands: Parity bands of the driven transition.
            q: Offset charge, e.
            pulse_len: Spectroscopy pulse length, seconds.
            grid_ghz: Drive frequencies, GHz.
            noise: Standard deviation of additive Gaussian noise.
            seed: Noise seed.

        Returns:
            SpectroscopyTrace.
        """
        if pulse_len <= 0:
            raise DataError("pulse_len must be positive")
        grid = np.asarray(grid_ghz, dtype=np.float64)
        half_width = 0.5 / (math.pi * pulse_len) * 1e-9
        f_plus, f_minus = bands.band_frequencies(q)
        population = sum(1.0 / (1.0 + ((grid - f0) / half_width) ** 2) for f0 in (f_plus, f_minus))
        if noise > 0:
            rng = np.random.default_rng([seed, 3])
            population = population + rng.normal(0.0, noise, grid.shape)
        if abs(float(f_plus - f_minus)) * 1e9 < RESOLVABLE_SEPARATION_HZ:
            logger.debug("Parity lines closer than the spectroscopic resolution")
        return SpectroscopyTrace(frequencies_ghz=grid, population=population, pulse_len=pulse_len)

    def gen_ramsey_trace(
        self,
        bands: ParityBands,
        q: float,
        t2_star: float,
        delays: ArrayLike,
        drive_ghz: Optional[float] = None,
        noise: float = 0.0,
        seed: int = 0,
    ) -> RamseyTrace:
        """Ramsey fringes beating between the two parity-band detunings.

        Args:
            bands: Parity bands of the driven transition.
            q: Offset charge, e.
            t2_star: Dephasing time, seconds.
            delays: Free-evolution delays, seconds.
            drive_ghz: Drive frequency; defaults to 1 MHz below the band centre.
            noise: Standard deviation of additive Gaussian noise.
            seed: Noise seed.

        Returns:
            RamseyTrace with the detunings used.
        """
        if t2_star <= 0:
            raise DataError("t2_star must be positive")
        t = np.asarray(delays, dtype=np.float64)
        drive = bands.f_bar_ghz - 1e-3 if drive_ghz is None else drive_ghz
        f_plus, f_minus = bands.band_frequencies(q)
        detunings = (float(f_plus - drive) * 1e9, float(f_minus - drive) * 1e9)
        signal = 0.5 * (
            np.cos(2 * np.pi * detunings[0] * t) + np.cos(2 * np.pi * detunings[1] * t)
        ) * np.exp(-t / t2_star)
        if noise > 0:
            signal = signal + np.random.default_rng([seed, 4]).normal(0.0, noise, t.shape)
        return RamseyTrace(delays=t, signal=signal, detunings_hz=detunings)

    def gen_relaxation_trace(
        self, t1: float, level: int, times: ArrayLike
    ) -> RelaxationTrace:
        """Populations while level ``level`` relaxes down the ladder k -> k-1 at rate k / t1."""
        if t1 <= 0 or level < 1:
            raise DataError("t1 must be positive and level at least 1")
        t = np.asarray(times, dtype=np.float64)
        generator = np.zeros((level + 1, level + 1))
        for k in range(1, level + 1):
            generator[k, k] = -k / t1
            generator[k, k - 1] = k / t1
        start = np.zeros(level + 1)
        start[level] = 1.0
        populations = np.array([start @ expm(generator * tk) for tk in t])
        return RelaxationTrace(times=t, populations=populations, t1=t1)

    @staticmethod
    def reset_decision(shot: ShotRecord, boundaries: ResetBoundaries) -> ResetPulse:
        """Choose the conditional reset pulses for one shot.

        Ground region -> none, state-1 region -> pi01, state-2/3 regions ->
        pi12 followed by pi01. Shots on a boundary take the lower state.
        """
        state = boundaries.classify(shot.i_volt, shot.q_volt)
        if state == 0:
            return ResetPulse.NONE
        if state == 1:
            return ResetPulse.PI01
        return ResetPulse.PI12_PI01

    def apply_active_reset(
        self,
        cluster_model: IqClusterModel,
        boundaries: ResetBoundaries,
        populations: Sequence[float],
        n_shots: int,
        seed: int = 0,
    ) -> float:
        """Simulate one measure-and-reset round and return the ground-state fraction.

        Args:
            cluster_model: Readout clusters and error matrix.
            boundaries: Controller decision boundaries.
            populations: Initial state populations.
            n_shots: Number of simulated qudits.
            seed: Random seed.

        Returns:
            Fraction of qudits in |0> after the conditional pulses.
        """
        weights = np.asarray(populations, dtype=np.float64)
        if weights.size != cluster_model.n_states or not np.isclose(weights.sum(), 1.0):
            raise DataError("populations must be a distribution over the cluster states")
        rng = np.random.default_rng([seed, 5])
        true_states = rng.choice(cluster_model.n_states, size=n_shots, p=weights)
        i_volt, q_volt = self._read_out(true_states, cluster_model, rng)
        after = [
            self.reset_decision(
                ShotRecord(0.0, float(i), float(q), TargetBand.EVEN), boundaries
            ).apply(int(s))
            for s, i, q in zip(true_states, i_volt, q_volt)
        ]
        return float(np.mean(np.asarray(after) == 0))
