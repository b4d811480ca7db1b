"""Data Transfer Objects."""

from .results import (
    ManifestFileDTO,
    PipelineResultDTO,
    RunManifestDTO,
    StageRecordDTO,
    SummaryRowDTO,
)
from .run_config import (
    ChargeRunConfig,
    FieldsRunConfig,
    GlobalRunSettings,
    ParityRunConfig,
    PowerLawRunConfig,
    ReproduceRunConfig,
    SpectrumRunConfig,
    load_run_config,
)

__all__ = [
    "ChargeRunConfig",
    "FieldsRunConfig",
    "GlobalRunSettings",
    "ManifestFileDTO",
    "ParityRunConfig",
    "PipelineResultDTO",
    "PowerLawRunConfig",
    "ReproduceRunConfig",
    "RunManifestDTO",
    "SpectrumRunConfig",
    "StageRecordDTO",
    "SummaryRowDTO",
    "load_run_config",
]
