"""Pipeline command handler."""

import asyncio
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Awaitable, Callable, Optional, TypeVar

import numpy as np
from numpy.typing import NDArray

from qudit_noise.application.commands.run_pipeline import PipelineKind, RunPipelineCommand
from qudit_noise.application.dtos.results import PipelineResultDTO, RunManifestDTO, SummaryRowDTO
from qudit_noise.application.dtos.run_config import (
    ChargeRunConfig,
    FieldsRunConfig,
    GlobalRunSettings,
    ParityRunConfig,
    PowerLawRunConfig,
    ReproduceRunConfig,
    SpectrumRunConfig,
)
from qudit_noise.domain.exceptions import ConfigurationError, QuditNoiseError, StageError
from qudit_noise.domain.ports.storage import IArtifactStoragePort
from qudit_noise.domain.services import (
    ClassifyService,
    FieldService,
    SpectralService,
    SpectrumService,
    SynthService,
)
from qudit_noise.domain.value_objects import (
    ChargeEnvConfig,
    ChargeTrace,
    DwellStatistics,
    EmissionKind,
    GaussianMixture,
    GridGeometry,
    HiddenMarkov,
    InducedChargeMap,
    IqClusterModel,
    LabelPath,
    ModelSelectionReport,
    ParityBands,
    ParityPath,
    ParityProcessConfig,
    PotentialField,
    ShotTable,
    SpectrumTable,
    TargetBand,
    TransitionMatrix,
)
from qudit_noise.domain.value_objects.spectra import (
    DwellEstimate,
    LorentzianFit,
    PowerLawFit,
    PsdEstimate,
    SegmentConfig,
)
from qudit_noise.domain.value_objects.transmon import ChargeDispersionReport
from qudit_noise.infrastructure.adapters.file_storage import FileStorage
from qudit_noise.infrastructure.codecs import (
    encode_charge_trace,
    encode_grid,
    encode_grid_slice,
    encode_json,
    encode_label_path,
    encode_model_selection,
    encode_psd,
    encode_shots,
    encode_shots_jsonl,
    encode_spectrum,
    encode_table,
    encode_transition_matrix,
    grid_header,
)
from qudit_noise.infrastructure.config import AppConfig, get_config
from qudit_noise.infrastructure.manifest_writer import ManifestWriter

logger = logging.getLogger(__name__)

T = TypeVar("T")

SUMMARY_HEADER = ("quantity", "planted", "recovered", "tolerance", "passed")
SPURIOUS_FLIP_LIMIT = 0.02
TRANSITION_TV_LIMIT = 0.05
RECIPROCITY_LIMIT = 0.03
DWELL_CONVENTION = "1/(pi f_c)"


@dataclass
class PipelineOutcome:
    """Console headline and summary rows produced by one pipeline."""

    headline: dict[str, Any] = field(default_factory=dict)
    summary: list[SummaryRowDTO] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Derive independent sub-stage seeds from a run seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def config_hash(config: GlobalRunSettings) -> str:
    """SHA-256 of the canonical configuration, ignoring where and how loudly it runs."""
    document = config.model_dump(mode="json", exclude={"output_dir", "verbosity"})
    return hashlib.sha256(encode_json(document)).hexdigest()


def temperature_label(temperature: float) -> str:
    """``0.01`` -> ``"10mK"``."""
    return f"{temperature * 1e3:g}mK"


def _subsample(values: NDArray[np.float64], size: int, seed: int) -> NDArray[np.float64]:
    if values.shape[0] <= size:
        return values
    index = np.sort(np.random.default_rng(seed).choice(values.shape[0], size, replace=False))
    return values[index]


def _head(shots: ShotTable, limit: int) -> ShotTable:
    if limit == 0 or len(shots) <= limit:
        return shots
    return ShotTable(
        t=shots.t[:limit],
        i_volt=shots.i_volt[:limit],
        q_volt=shots.q_volt[:limit],
        band=shots.band[:limit],
        truth_state=shots.truth_state[:limit],
    )


def _to_domain(convert: Callable[[], T], section: str) -> T:
    try:
        return convert()
    except ValueError as e:
        raise ConfigurationError(str(e), field=section) from e


class PipelineHandler:
    """Handler for pipeline commands.

    Runs synthesis and analysis stages on worker threads, fans out
    independent stages concurrently and writes every artifact through one
    ManifestWriter.
    """

    def __init__(
        self,
        spectrum_service: Optional[SpectrumService] = None,
        synth_service: Optional[SynthService] = None,
        classify_service: Optional[ClassifyService] = None,
        spectral_service: Optional[SpectralService] = None,
        field_service_factory: Callable[..., FieldService] = FieldService,
        storage_factory: Callable[[Path], IArtifactStoragePort] = FileStorage,
        app_config: Optional[AppConfig] = None,
    ) -> None:
        """Initialize the handler.

        Args:
            spectrum_service: Hamiltonian spectra.
            synth_service: Synthetic data generators.
            classify_service: Mixture and hidden-Markov inference.
            spectral_service: PSD estimation and fitting.
            field_service_factory: Builds a FieldService from solver settings.
            storage_factory: Builds the storage for one run directory.
            app_config: Process configuration; defaults to the global one.
        """
        self._spectrum = spectrum_service or SpectrumService()
        self._synth = synth_service or SynthService()
        self._classify = classify_service or ClassifyService()
        self._spectral = spectral_service or SpectralService()
        self._field_factory = field_service_factory
        self._storage_factory = storage_factory
        self._app_config = app_config or get_config()
        self._slots = asyncio.Semaphore(self._app_config.workers)

    # ------------------------------------------------------------------ plumbing

    async def _stage(
        self, writer: ManifestWriter, name: str, func: Callable[..., T], *args: Any
    ) -> T:
        """Run one stage on a worker thread and record its outcome.

        Raises:
            StageError: Naming the stage, after recording it as FAILED.
        """
        async with self._slots:
            logger.info(f"Stage {name} started")
            try:
                result = await asyncio.to_thread(func, *args)
            except Exception as e:
                logger.error(f"Stage {name} failed: {e}")
                await writer.record_stage(name, "FAILED", str(e))
                raise StageError(name, e) from e
        await writer.record_stage(name, "OK")
        logger.info(f"Stage {name} finished")
        return result

    async def _emit(
        self,
        writer: ManifestWriter,
        path: str,
        fmt: str,
        encoder: Callable[..., bytes],
        *args: Any,
    ) -> None:
        data = await asyncio.to_thread(encoder, *args)
        await writer.write(path, data, fmt)

    def _run_dir(self, kind: PipelineKind, config: GlobalRunSettings) -> Path:
        if config.output_dir:
            return Path(config.output_dir)
        return self._app_config.output_dir / kind.value

    async def handle(self, command: RunPipelineCommand) -> PipelineResultDTO:
        """Handle a run pipeline command.

        Args:
            command: The pipeline command.

        Returns:
            A PipelineResultDTO describing the run.

        Raises:
            ConfigurationError: If the run document cannot become domain objects;
                the manifest records a FAILED setup stage.
            StageError: If a stage of a single pipeline fails; the manifest is
                written first with the stage marked FAILED.
        """
        config = command.resolved_config()
        run_dir = self._run_dir(command.kind, config)
        writer = ManifestWriter(
            self._storage_factory(run_dir),
            command=command.kind.value,
            seed=config.seed,
            config_hash=config_hash(config),
        )
        logger.info(f"Running {command.kind.value} into {run_dir} (seed {config.seed})")

        runners: dict[PipelineKind, Callable[..., Awaitable[PipelineOutcome]]] = {
            PipelineKind.SPECTRUM: self.cmd_spectrum,
            PipelineKind.PARITY: self.cmd_parity_pipeline,
            PipelineKind.CHARGE: self.cmd_charge_pipeline,
            PipelineKind.FIELDS: self.cmd_fields,
            PipelineKind.REPRODUCE: self.cmd_reproduce,
        }
        try:
            outcome = await runners[command.kind](config, writer)
        except StageError:
            await writer.finalize({"quick": config.quick})
            raise
        except QuditNoiseError as e:
            await writer.record_stage("setup", "FAILED", str(e))
            await writer.finalize({"quick": config.quick})
            raise
        document = await writer.finalize({"quick": config.quick})
        return PipelineResultDTO(
            command=command.kind.value,
            output_dir=str(run_dir),
            manifest=RunManifestDTO.model_validate(document),
            headline=outcome.headline,
            summary=outcome.summary,
            warnings=outcome.warnings,
        )

    # ------------------------------------------------------------------ spectrum

    def _spectrum_stage(
        self, config: SpectrumRunConfig
    ) -> tuple[SpectrumTable, list[ParityBands], ChargeDispersionReport]:
        params = config.to_domain()
        grid = np.linspace(0.0, 1.0, config.grid_points)
        table = self._spectrum.spectrum_scan(params, grid, config.max_level, config.n_cut)
        bands = [self._spectrum.parity_bands(table, i, j) for i, j in config.transitions]
        if config.two_photon_13:
            bands.append(self._spectrum.parity_bands(table, 1, 3, photons=2))
        report = self._spectrum.charge_dispersion_report(params)
        return table, bands, report

    async def cmd_spectrum(
        self, config: SpectrumRunConfig, writer: ManifestWriter, prefix: str = ""
    ) -> PipelineOutcome:
        """Levels over the gate-charge grid, parity bands and the dispersion record.

        Writes ``spectrum.csv`` and ``parity_bands.json``.
        """
        _to_domain(config.to_domain, "spectrum")
        table, bands, report = await self._stage(
            writer, f"{prefix}spectrum", self._spectrum_stage, config
        )
        anharmonicity = self._spectrum.anharmonicity(table)
        document = {
            "e_j_ghz": table.params.e_j,
            "e_c_ghz": table.params.e_c,
            "n_cut": table.n_cut,
            "converged": table.converged,
            "convergence_delta_ghz": table.convergence_delta_ghz,
            "anharmonicity_ghz": anharmonicity,
            "bands": [b.to_dict() for b in bands],
            "charge_dispersion": report.to_dict(),
        }
        await asyncio.gather(
            self._emit(writer, f"{prefix}spectrum.csv", "spectrum-csv", encode_spectrum, table),
            self._emit(
                writer, f"{prefix}parity_bands.json", "parity-bands-json", encode_json, document
            ),
        )

        outcome = PipelineOutcome(
            headline={
                "f01_ghz": report.f01_ghz,
                "dispersion_12_khz": report.dispersion_12_khz,
                "anharmonicity_mhz": anharmonicity * 1e3,
                "n_cut_converged": table.converged,
            }
        )
        outcome.summary.append(
            SummaryRowDTO(
                quantity="f01 (GHz)",
                planted=report.quoted_f01_ghz,
                recovered=report.f01_ghz,
                tolerance="record",
            )
        )
        outcome.summary.append(
            SummaryRowDTO(
                quantity="max 1-2 charge dispersion (kHz)",
                planted=report.quoted_dispersion_12_khz,
                recovered=report.dispersion_12_khz,
                tolerance="record (±10% flagged)",
            )
        )
        if not report.dispersion_matches_quote:
            outcome.warnings.append(
                f"1-2 dispersion {report.dispersion_12_khz:.1f} kHz differs from the quoted "
                f"{report.quoted_dispersion_12_khz:.0f} kHz"
            )
        if not table.converged:
            outcome.warnings.append(f"n_cut={table.n_cut} did not converge")
        return outcome

    # -------------------------------------------------------------------- parity

    def _synthesize_parity(
        self, process: ParityProcessConfig, clusters: IqClusterModel
    ) -> tuple[ParityPath, ShotTable]:
        path = self._synth.gen_parity_path(process)
        return path, self._synth.gen_parity_shots(path, clusters, process)

    def _classify_shots(
        self, shots: ShotTable, clusters: IqClusterModel, config: ParityRunConfig, seed: int
    ) -> tuple[GaussianMixture, NDArray[np.int64]]:
        reference = clusters.means[:3]
        model = self._classify.gmm_fit(
            shots.iq[: config.gmm_training_shots],
            3,
            seed=seed,
            restarts=config.gmm_restarts,
            init_means=reference,
        )
        mapping = self._classify.relabel_by_reference(model, reference)
        labels = mapping[self._classify.gmm_classify(model, shots.iq).labels]
        return model, self._classify.parity_band_reduce(labels)

    def _decode_band(
        self,
        shots: ShotTable,
        excited: NDArray[np.int64],
        band: TargetBand,
        restarts: int,
        seed: int,
    ) -> tuple[HiddenMarkov, LabelPath]:
        mask = shots.band == band.parity
        observations = excited[mask]
        model = self._classify.hmm_train(
            observations,
            2,
            EmissionKind.CATEGORICAL,
            seed=seed,
            restarts=restarts,
            n_symbols=2,
        )
        path = self._classify.hmm_viterbi(model, observations, shots.t[mask])
        assert model.emission_probs is not None
        bright = (model.emission_probs[:, 1] > 0.5).astype(np.int64)
        return model, LabelPath(times=path.times, states=bright[path.states])

    def _parity_spectrum(
        self, fused: LabelPath, config: ParityRunConfig, sample_interval: float
    ) -> tuple[PsdEstimate, LorentzianFit, DwellEstimate]:
        series = fused.states.astype(np.float64)
        psd = self._spectral.psd(series, sample_interval, config.segmenting(series.size))
        f_range = None
        if config.fit_max_hz is not None:
            f_range = (float(psd.frequencies[0]), config.fit_max_hz)
        fit = self._spectral.fit_lorentzian(psd, f_range)
        return psd, fit, self._spectral.dwell_from_knee(fit)

    async def cmd_parity_pipeline(
        self, config: ParityRunConfig, writer: ManifestWriter, prefix: str = ""
    ) -> PipelineOutcome:
        """Synthesize parity shots and recover the dwell time.

        Chain: telegraph path and shots, mixture classification, band
        reduction, per-band hidden-Markov decoding, parity fusion, PSD and
        Lorentzian fit. Writes shots, the decoded path, the PSD, the fit and
        a dwell report.
        """
        process, clusters = _to_domain(config.to_domain, "parity")
        synth_seed, gmm_seed, even_seed, odd_seed = spawn_seeds(config.seed, 4)
        process = process.with_seed(synth_seed)
        outcome = PipelineOutcome()
        if process.undersampled:
            message = (
                f"Duty cycle {process.duty_cycle:g} s is not shorter than the dwell time "
                f"{process.dwell_time:g} s; flips will be missed"
            )
            logger.warning(message)
            outcome.warnings.append(message)

        path, shots = await self._stage(
            writer, f"{prefix}synthesize", self._synthesize_parity, process, clusters
        )
        exported = _head(shots, config.max_written_shots)
        await asyncio.gather(
            self._emit(writer, f"{prefix}shots.csv", "shots-csv", encode_shots, exported),
            self._emit(
                writer, f"{prefix}shots.jsonl", "shots-jsonl", encode_shots_jsonl, exported
            ),
        )

        mixture, excited = await self._stage(
            writer, f"{prefix}classify", self._classify_shots, shots, clusters, config, gmm_seed
        )
        (even_model, even_path), (odd_model, odd_path) = await asyncio.gather(
            self._stage(
                writer,
                f"{prefix}decode_even",
                self._decode_band,
                shots,
                excited,
                TargetBand.EVEN,
                config.hmm_restarts,
                even_seed,
            ),
            self._stage(
                writer,
                f"{prefix}decode_odd",
                self._decode_band,
                shots,
                excited,
                TargetBand.ODD,
                config.hmm_restarts,
                odd_seed,
            ),
        )
        fused = self._classify.fuse_parity_paths(even_path, odd_path)
        planted = LabelPath(times=fused.times, states=path.parity_at(fused.times))
        agreement = self._classify.flip_agreement(fused, planted)
        run_lengths = self._classify.dwell_times(fused)
        await self._emit(
            writer, f"{prefix}decoded_path.csv", "label-path-csv", encode_label_path, fused
        )

        psd, fit, dwell = await self._stage(
            writer, f"{prefix}psd_fit", self._parity_spectrum, fused, config, process.duty_cycle
        )
        deviation = abs(dwell.telegraph_dwell_s - process.dwell_time) / process.dwell_time
        within = deviation <= config.dwell_tolerance
        if not within:
            message = (
                f"Recovered dwell {DWELL_CONVENTION} = "
                f"{dwell.telegraph_dwell_s * 1e3:.3f} ms deviates "
                f"{deviation:.1%} from the planted {process.dwell_time * 1e3:.3f} ms"
            )
            logger.warning(message)
            outcome.warnings.append(message)

        report = {
            "planted_dwell_s": process.dwell_time,
            "duty_cycle_s": process.duty_cycle,
            "duration_s": process.duration,
            "undersampled": process.undersampled,
            "dwell_convention": DWELL_CONVENTION,
            "knee": dwell.to_dict(),
            "relative_deviation": deviation,
            "tolerance": config.dwell_tolerance,
            "within_tolerance": within,
            "run_length_mean_dwell_s": run_lengths.mean_stable_time,
            "planted_flips": agreement.planted,
            "decoded_flips": agreement.decoded,
            "matched_flips": agreement.matched,
            "spurious_flips": agreement.spurious,
            "missed_flips": agreement.missed,
            "spurious_fraction": agreement.spurious_fraction,
            "shots_total": len(shots),
            "shots_exported": len(exported),
        }
        models = {
            "mixture": mixture.to_dict(),
            "hmm_even": even_model.to_dict(),
            "hmm_odd": odd_model.to_dict(),
        }
        writes = [
            self._emit(writer, f"{prefix}psd_parity.csv", "psd-csv", encode_psd, psd),
            self._emit(
                writer,
                f"{prefix}lorentzian_fit.json",
                "lorentzian-fit-json",
                encode_json,
                {"fit": fit.to_dict(), "dwell": dwell.to_dict(), "segments": psd.segments},
            ),
            self._emit(
                writer, f"{prefix}dwell_report.json", "dwell-report-json", encode_json, report
            ),
            self._emit(writer, f"{prefix}models.json", "models-json", encode_json, models),
        ]
        await asyncio.gather(*writes)

        outcome.headline.update(
            {
                "planted_dwell_ms": process.dwell_time * 1e3,
                "telegraph_dwell_ms": dwell.telegraph_dwell_s * 1e3,
                "dwell_convention": DWELL_CONVENTION,
                "knee_hz": fit.knee_hz,
                "knee_reciprocal_ms": dwell.knee_reciprocal_s * 1e3,
                "spurious_fraction": agreement.spurious_fraction,
            }
        )
        outcome.summary += [
            SummaryRowDTO(
                quantity=f"parity dwell time {DWELL_CONVENTION} (s)",
                planted=process.dwell_time,
                recovered=dwell.telegraph_dwell_s,
                tolerance=f"±{config.dwell_tolerance:.0%}",
                passed=within,
            ),
            SummaryRowDTO(
                quantity="parity PSD knee (Hz)",
                planted=1.0 / (np.pi * process.dwell_time),
                recovered=fit.knee_hz,
                tolerance="record",
            ),
            SummaryRowDTO(
                quantity="spurious flips / planted flips",
                planted=0.0,
                recovered=agreement.spurious_fraction,
                tolerance=f"< {SPURIOUS_FLIP_LIMIT:.0%}",
                passed=None if config.quick else agreement.spurious_fraction < SPURIOUS_FLIP_LIMIT,
            ),
        ]
        return outcome

    # -------------------------------------------------------------------- charge

    def _select_order(
        self, traces: list[ChargeTrace], config: ChargeRunConfig, seed: int
    ) -> tuple[ModelSelectionReport, GaussianMixture]:
        pooled = np.concatenate([t.q for t in traces])
        usable = min(pooled.size, config.selection_max_samples) // 2
        max_order = max(1, min(config.max_order, usable // 10))
        if max_order < config.max_order:
            logger.warning(f"Model-order scan capped at {max_order} by the sample count")
        report = self._classify.select_model_order(
            pooled,
            orders=tuple(range(1, max_order + 1)),
            seed=seed,
            restarts=config.selection_restarts,
            max_samples=config.selection_max_samples,
        )
        sample = _subsample(pooled, config.selection_max_samples, seed)
        fit = self._classify.gmm_fit(sample, report.chosen, seed=seed, restarts=2)
        order = np.argsort(fit.means[:, 0])
        return report, fit.permuted(order)

    def _decode_temperature(
        self,
        trace: ChargeTrace,
        pooled: GaussianMixture,
        config: ChargeRunConfig,
        seed: int,
    ) -> tuple[HiddenMarkov, LabelPath, TransitionMatrix, DwellStatistics, GaussianMixture]:
        n = pooled.n_components
        model = self._classify.hmm_train(
            trace.q,
            n,
            EmissionKind.GAUSSIAN,
            seed=seed,
            restarts=config.hmm_restarts,
            init_means=pooled.means[:, 0],
        )
        path = self._classify.hmm_viterbi(model, trace.q, trace.times)
        matrix = self._classify.transition_matrix(
            path, n, trace.temperature, neighbor_reach=config.neighbor_reach
        )
        dwell = self._classify.dwell_times(path)
        local = self._classify.gmm_fit(
            _subsample(trace.q, config.selection_max_samples, seed),
            n,
            seed=seed,
            restarts=1,
            init_means=pooled.means,
        )
        return model, path, matrix, dwell, local

    def _power_law(
        self, surrogate: PowerLawRunConfig, seed: int
    ) -> tuple[PsdEstimate, PowerLawFit]:
        interval = surrogate.sample_interval_s
        series = self._spectral.gen_power_law_noise(
            surrogate.alpha, surrogate.amp_1hz, surrogate.n_samples, interval, seed
        )
        segmenting = SegmentConfig(nperseg=min(surrogate.nperseg, series.size))
        psd = self._spectral.psd(series, interval, segmenting)
        f_range = (surrogate.fit_min_hz, surrogate.fit_max_hz)
        return psd, self._spectral.fit_power_law(psd, f_range)

    def _power_law_rows(
        self,
        name: str,
        unit: str,
        surrogate: PowerLawRunConfig,
        fit: PowerLawFit,
        config: ChargeRunConfig,
    ) -> list[SummaryRowDTO]:
        ratio = fit.amp_1hz / surrogate.amp_1hz
        return [
            SummaryRowDTO(
                quantity=f"{name} alpha",
                planted=surrogate.alpha,
                recovered=fit.alpha,
                tolerance=f"±{config.alpha_tolerance:g}",
                passed=abs(fit.alpha - surrogate.alpha) <= config.alpha_tolerance,
            ),
            SummaryRowDTO(
                quantity=f"{name} amplitude at 1 Hz ({unit})",
                planted=surrogate.amp_1hz,
                recovered=fit.amp_1hz,
                tolerance=f"×{config.amplitude_factor:g}",
                passed=1.0 / config.amplitude_factor <= ratio <= config.amplitude_factor,
            ),
        ]

    async def cmd_charge_pipeline(
        self, config: ChargeRunConfig, writer: ManifestWriter, prefix: str = ""
    ) -> PipelineOutcome:
        """Offset-charge environment: traces, model order, transition matrices, power laws.

        Model order is chosen once on the data pooled over every temperature;
        each temperature is then decoded with a Gaussian hidden-Markov model
        seeded from the pooled mixture.
        """
        env: ChargeEnvConfig = _to_domain(config.to_domain, "charge")
        temperatures = sorted(env.temperatures)
        seeds = spawn_seeds(config.seed, 3 + len(temperatures))
        env = env.with_seed(seeds[0])
        outcome = PipelineOutcome()

        traces = list(
            await asyncio.gather(
                *(
                    self._stage(
                        writer,
                        f"{prefix}trace_{temperature_label(t)}",
                        self._synth.gen_charge_trace,
                        env,
                        t,
                    )
                    for t in temperatures
                )
            )
        )
        await asyncio.gather(
            *(
                self._emit(
                    writer,
                    f"{prefix}charge_trace_{temperature_label(t.temperature)}.csv",
                    "charge-trace-csv",
                    encode_charge_trace,
                    t,
                )
                for t in traces
            )
        )
        surrogates = asyncio.gather(
            self._stage(
                writer, f"{prefix}offset_noise", self._power_law, config.offset_noise, seeds[1]
            ),
            self._stage(
                writer,
                f"{prefix}frequency_noise",
                self._power_law,
                config.frequency_noise,
                seeds[2],
            ),
        )

        try:
            selection, pooled = await self._stage(
                writer, f"{prefix}model_selection", self._select_order, traces, config, seeds[0]
            )
            decoded = await asyncio.gather(
                *(
                    self._stage(
                        writer,
                        f"{prefix}decode_{temperature_label(trace.temperature)}",
                        self._decode_temperature,
                        trace,
                        pooled,
                        config,
                        seed,
                    )
                    for trace, seed in zip(traces, seeds[3:])
                )
            )
        except StageError:
            surrogates.cancel()
            raise
        (offset_psd, offset_fit), (freq_psd, freq_fit) = await surrogates
        writes: list[Awaitable[None]] = []

        matrices = [d[2] for d in decoded]
        dwell_cold = decoded[0][3]
        n_chosen = selection.chosen
        cluster_shift = self._classify.compare_cluster_fits(
            pooled, {t.temperature: d[4] for t, d in zip(traces, decoded)}
        )
        similarity = self._classify.histogram_self_similarity(traces[0])
        planted_dwell = env.mean_stable_time(temperatures[0])

        per_temperature: dict[str, Any] = {}
        for trace, (_, path, matrix, dwell, _) in zip(traces, decoded):
            label = temperature_label(trace.temperature)
            entry: dict[str, Any] = {
                "temperature_K": trace.temperature,
                "neighbor_mass": matrix.neighbor_mass,
                "scramble_mass": matrix.scramble_mass,
                "scramble_count": matrix.scramble_count,
                "scramble_interval_hours": matrix.scramble_interval_hours,
                "mean_stable_time_s": dwell.mean_stable_time,
                "median_stable_time_s": dwell.median_stable_time,
                "max_stable_time_s": dwell.max_stable_time,
                "standard_error_s": dwell.standard_error,
                "planted_mean_stable_time_s": env.mean_stable_time(trace.temperature),
                "empty_rows": list(matrix.empty_rows),
                "cluster_shift_e": cluster_shift[trace.temperature],
            }
            if n_chosen == env.n_states:
                tv = matrix.total_variation(env.transition_matrix(trace.temperature))
                entry["max_row_total_variation"] = float(tv.max())
            per_temperature[label] = entry
            writes.append(
                self._emit(
                    writer,
                    f"{prefix}transition_{label}.csv",
                    "transition-matrix-csv",
                    encode_transition_matrix,
                    matrix,
                )
            )
            writes.append(
                self._emit(
                    writer,
                    f"{prefix}decoded_path_{label}.csv",
                    "label-path-csv",
                    encode_label_path,
                    path,
                )
            )

        scramble_total = sum(m.scramble_count for m in matrices)
        record_hours = sum(m.duration_s for m in matrices) / 3600.0
        scramble_hours = record_hours / scramble_total if scramble_total else float("inf")
        planted_scramble_hours = 1.0 / env.scramble_rate / 3600.0
        scramble_band = 3.0 / np.sqrt(scramble_total) if scramble_total else float("inf")
        masses = [m.neighbor_mass for m in matrices]
        increasing = bool(np.all(np.diff(masses) > 0))

        report = {
            "chosen_order": n_chosen,
            "planted_order": env.n_states,
            "pooled_means_e": pooled.means[:, 0],
            "temperatures": per_temperature,
            "pooled_scramble_interval_hours": scramble_hours,
            "planted_scramble_interval_hours": planted_scramble_hours,
            "neighbor_mass_increasing": increasing,
            "histogram_self_similarity_max_tv": float(similarity.max()),
            "time_compression": config.time_compression,
        }
        writes += [
            self._emit(
                writer,
                f"{prefix}model_selection.csv",
                "model-selection-csv",
                encode_model_selection,
                selection,
            ),
            self._emit(
                writer, f"{prefix}dwell_report.json", "dwell-report-json", encode_json, report
            ),
            self._emit(writer, f"{prefix}psd_offset_noise.csv", "psd-csv", encode_psd, offset_psd),
            self._emit(writer, f"{prefix}psd_frequency_noise.csv", "psd-csv", encode_psd, freq_psd),
            self._emit(
                writer,
                f"{prefix}power_law_fits.json",
                "power-law-fit-json",
                encode_json,
                {"offset_noise": offset_fit.to_dict(), "frequency_noise": freq_fit.to_dict()},
            ),
        ]
        await asyncio.gather(*writes)

        if n_chosen != env.n_states:
            outcome.warnings.append(
                f"Model selection chose N={n_chosen}; {env.n_states} configurations were planted"
            )
        outcome.headline.update(
            {
                "chosen_order": n_chosen,
                "cold_mean_dwell_min": dwell_cold.mean_stable_time / 60.0,
                "offset_alpha": offset_fit.alpha,
                "frequency_alpha": freq_fit.alpha,
            }
        )
        outcome.summary += self._power_law_rows(
            "offset noise", "e^2/Hz", config.offset_noise, offset_fit, config
        )
        outcome.summary += self._power_law_rows(
            "frequency noise", "Hz^2/Hz", config.frequency_noise, freq_fit, config
        )
        outcome.summary += [
            SummaryRowDTO(
                quantity="configurations N",
                planted=env.n_states,
                recovered=n_chosen,
                tolerance="reported" if config.quick else "exact",
                passed=None if config.quick else n_chosen == env.n_states,
            ),
            SummaryRowDTO(
                quantity=f"{temperature_label(temperatures[0])} mean dwell (s)",
                planted=planted_dwell,
                recovered=dwell_cold.mean_stable_time,
                tolerance=f"±3σ ({3 * dwell_cold.standard_error:.0f} s)",
                passed=abs(dwell_cold.mean_stable_time - planted_dwell)
                <= 3 * dwell_cold.standard_error,
            ),
            SummaryRowDTO(
                quantity="scramble interval (h)",
                planted=planted_scramble_hours,
                recovered=scramble_hours,
                tolerance=f"±{scramble_band:.0%}",
                passed=abs(scramble_hours / planted_scramble_hours - 1.0) <= scramble_band,
            ),
            SummaryRowDTO(
                quantity="neighbour mass vs temperature",
                planted="increasing",
                recovered="increasing" if increasing else "not increasing",
                tolerance="strict",
                passed=increasing if len(temperatures) > 1 else None,
            ),
        ]
        if n_chosen == env.n_states:
            worst = max(v["max_row_total_variation"] for v in per_temperature.values())
            outcome.summary.append(
                SummaryRowDTO(
                    quantity="transition matrix row total variation",
                    planted=0.0,
                    recovered=worst,
                    tolerance=f"< {TRANSITION_TV_LIMIT:g}",
                    passed=None if config.quick else worst < TRANSITION_TV_LIMIT,
                )
            )
        return outcome

    # -------------------------------------------------------------------- fields

    def _reciprocity(
        self,
        solver: FieldService,
        geom: GridGeometry,
        charge_map: InducedChargeMap,
        electrode: str,
    ) -> dict[str, Any]:
        centre = geom.shape[0] // 2
        source = (centre, geom.shape[1] // 2, max(geom.z_surface_index - 2, 1))
        direct = solver.induced_charge_direct(
            solver.solve_point_charge(geom, source), geom, electrode
        )
        via_map = float(charge_map.values[source])
        relative = abs(direct - via_map) / max(abs(via_map), 1e-300)
        return {
            "geometry": geom.name,
            "electrode": electrode,
            "source_index": list(source),
            "direct": direct,
            "reciprocity": via_map,
            "relative_difference": relative,
        }

    async def _emit_map(
        self, writer: ManifestWriter, prefix: str, charge_map: InducedChargeMap, geom: GridGeometry
    ) -> None:
        stem = f"{prefix}induced_{geom.name}"
        await asyncio.gather(
            self._emit(writer, f"{stem}.bin", "grid-f8", encode_grid, charge_map.values),
            self._emit(
                writer,
                f"{stem}.json",
                "grid-header-json",
                encode_json,
                grid_header(charge_map, geom),
            ),
            self._emit(
                writer, f"{stem}_slice.csv", "grid-slice-csv", encode_grid_slice, charge_map, geom
            ),
        )

    async def cmd_fields(
        self, config: FieldsRunConfig, writer: ManifestWriter, prefix: str = ""
    ) -> PipelineOutcome:
        """Induced-charge maps and sensitive volumes of both device geometries."""
        scale = _to_domain(lambda: config.to_domain(self._app_config.max_grid_points), "fields")
        solver = self._field_factory(
            tolerance=config.tolerance,
            max_iterations=config.max_iterations,
            max_grid_points=self._app_config.max_grid_points,
        )
        differential, island = await self._stage(
            writer, f"{prefix}geometry", solver.build_device_geometries, scale
        )
        combinations = {
            differential.name: {"paddle_a": 1.0, "paddle_b": -1.0},
            island.name: {"island": 1.0},
        }
        jobs = [
            (geom, electrode)
            for geom in (differential, island)
            for electrode in combinations[geom.name]
        ]
        solutions: list[PotentialField] = list(
            await asyncio.gather(
                *(
                    self._stage(
                        writer,
                        f"{prefix}weighting_{geom.name}_{electrode}",
                        solver.solve_weighting_potential,
                        geom,
                        electrode,
                    )
                    for geom, electrode in jobs
                )
            )
        )
        maps: dict[str, InducedChargeMap] = {}
        for geom in (differential, island):
            weighting = {
                electrode: solution
                for (g, electrode), solution in zip(jobs, solutions)
                if g.name == geom.name
            }
            maps[geom.name] = solver.induced_charge_map(geom, combinations[geom.name], weighting)

        curves = {
            name: solver.sensitive_volume_curve(charge_map, config.thresholds)
            for name, charge_map in maps.items()
        }
        rows = []
        ordering = True
        for d, s in zip(curves[differential.name], curves[island.name]):
            larger = d.volume_m3 > s.volume_m3
            ordering = ordering and larger
            rows.append(
                {
                    "threshold": d.threshold,
                    "differential_m3": d.volume_m3,
                    "single_island_m3": s.volume_m3,
                    "differential_cells": d.cell_count,
                    "single_island_cells": s.cell_count,
                    "differential_larger": larger,
                }
            )

        writes = [
            self._emit_map(writer, prefix, maps[geom.name], geom) for geom in (differential, island)
        ]
        writes.append(
            self._emit(
                writer,
                f"{prefix}sensitive_volume.csv",
                "sensitive-volume-csv",
                encode_table,
                list(rows[0].keys()),
                rows,
            )
        )
        await asyncio.gather(*writes)
        outcome = PipelineOutcome(
            headline={
                "grid_points": differential.n_points,
                "volume_ordering_holds": ordering,
                "iterations_max": max(s.iterations for s in solutions),
            }
        )
        outcome.summary.append(
            SummaryRowDTO(
                quantity="sensitive volume ordering",
                planted="differential > single_island",
                recovered="differential > single_island" if ordering else "violated",
                tolerance="every threshold",
                passed=ordering,
            )
        )

        geometry_doc: dict[str, Any] = {
            "differential": differential.to_dict(),
            "single_island": island.to_dict(),
            "solver": {
                "tolerance": config.tolerance,
                "iterations": {
                    f"{g.name}/{e}": s.iterations for (g, e), s in zip(jobs, solutions)
                },
                "final_residual": {
                    f"{g.name}/{e}": s.final_residual for (g, e), s in zip(jobs, solutions)
                },
            },
        }
        if config.reciprocity_check:
            check = await self._stage(
                writer,
                f"{prefix}reciprocity",
                self._reciprocity,
                solver,
                island,
                maps[island.name],
                "island",
            )
            geometry_doc["reciprocity_check"] = check
            outcome.summary.append(
                SummaryRowDTO(
                    quantity="reciprocity vs direct solve",
                    planted=check["direct"],
                    recovered=check["reciprocity"],
                    tolerance=f"< {RECIPROCITY_LIMIT:.0%}",
                    passed=check["relative_difference"] < RECIPROCITY_LIMIT,
                )
            )
        await self._emit(
            writer, f"{prefix}fields_report.json", "fields-json", encode_json, geometry_doc
        )
        if not ordering:
            outcome.warnings.append(
                "Differential sensitive volume is not larger at every threshold"
            )
        return outcome

    # ----------------------------------------------------------------- reproduce

    async def _guarded(
        self,
        name: str,
        runner: Callable[[Any, ManifestWriter, str], Awaitable[PipelineOutcome]],
        config: GlobalRunSettings,
        writer: ManifestWriter,
    ) -> PipelineOutcome:
        try:
            return await runner(config, writer, f"{name}/")
        except StageError as e:
            return PipelineOutcome(warnings=[str(e)])
        except QuditNoiseError as e:
            await writer.record_stage(f"{name}/setup", "FAILED", str(e))
            logger.error(f"Pipeline {name} could not start: {e}")
            return PipelineOutcome(warnings=[f"{name}: {e}"])

    async def cmd_reproduce(
        self, config: ReproduceRunConfig, writer: ManifestWriter, prefix: str = ""
    ) -> PipelineOutcome:
        """Run every pipeline into one directory and tabulate planted against recovered values.

        A failing stage is recorded in the manifest and the other pipelines
        continue. Writes ``summary.csv``.
        """
        seeds = spawn_seeds(config.seed, 4)
        plans: list[tuple[str, Any, GlobalRunSettings]] = [
            ("spectrum", self.cmd_spectrum, config.spectrum),
            ("parity", self.cmd_parity_pipeline, config.parity),
            ("charge", self.cmd_charge_pipeline, config.charge),
            ("fields", self.cmd_fields, config.fields),
        ]
        outcomes = await asyncio.gather(
            *(
                self._guarded(
                    f"{prefix}{name}",
                    runner,
                    sub.model_copy(update={"seed": seed, "quick": config.quick or sub.quick}),
                    writer,
                )
                for (name, runner, sub), seed in zip(plans, seeds)
            )
        )
        combined = PipelineOutcome()
        for (name, _, _), part in zip(plans, outcomes):
            combined.summary += part.summary
            combined.warnings += part.warnings
            for key, value in part.headline.items():
                combined.headline[f"{name}.{key}"] = value
        rows = [row.model_dump() for row in combined.summary]
        await self._emit(
            writer, f"{prefix}summary.csv", "summary-csv", encode_table, list(SUMMARY_HEADER), rows
        )
        passed = [r.passed for r in combined.summary if r.passed is not None]
        combined.headline["checks_passed"] = f"{sum(passed)}/{len(passed)}"
        return combined
