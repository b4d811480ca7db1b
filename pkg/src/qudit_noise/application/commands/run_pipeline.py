"""Run pipeline command."""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from qudit_noise.application.dtos.run_config import (
    ChargeRunConfig,
    FieldsRunConfig,
    GlobalRunSettings,
    ParityRunConfig,
    ReproduceRunConfig,
    SpectrumRunConfig,
)


class PipelineKind(str, Enum):
    """Available pipelines."""

    SPECTRUM = "spectrum"
    PARITY = "parity"
    CHARGE = "charge"
    FIELDS = "fields"
    REPRODUCE = "reproduce"

    @property
    def config_model(self) -> type[GlobalRunSettings]:
        """Run-document model read by this pipeline."""
        return {
            PipelineKind.SPECTRUM: SpectrumRunConfig,
            PipelineKind.PARITY: ParityRunConfig,
            PipelineKind.CHARGE: ChargeRunConfig,
            PipelineKind.FIELDS: FieldsRunConfig,
            PipelineKind.REPRODUCE: ReproduceRunConfig,
        }[self]


@dataclass(frozen=True)
class RunPipelineCommand:
    """Command to run one pipeline.

    Holds the parsed run document together with the command-line overrides
    that take precedence over it.
    """

    kind: PipelineKind
    config: GlobalRunSettings
    seed: Optional[int] = None
    output_dir: Optional[Path] = None
    quick: bool = False

    def __post_init__(self) -> None:
        """Validate command after initialization."""
        if not isinstance(self.config, self.kind.config_model):
            raise ValueError(
                f"{self.kind.value} expects {self.kind.config_model.__name__}, "
                f"got {type(self.config).__name__}"
            )
        if self.seed is not None and self.seed < 0:
            raise ValueError("Seed cannot be negative")

    @classmethod
    def from_dto(
        cls,
        kind: PipelineKind,
        dto: GlobalRunSettings,
        seed: Optional[int] = None,
        output_dir: Optional[Path] = None,
        quick: bool = False,
    ) -> "RunPipelineCommand":
        """Create command from a run document.

        Args:
            kind: Pipeline to run.
            dto: Parsed run configuration.
            seed: Seed override.
            output_dir: Output directory override.
            quick: Whether to apply quick mode.

        Returns:
            A RunPipelineCommand instance.
        """
        return cls(kind=kind, config=dto, seed=seed, output_dir=output_dir, quick=quick)

    def resolved_config(self) -> GlobalRunSettings:
        """Run document with seed, output and quick-mode overrides applied."""
        config = self.config
        if self.quick and not config.quick:
            config = config.quickened()
        updates: dict[str, object] = {}
        if self.seed is not None:
            updates["seed"] = self.seed
        if self.output_dir is not None:
            updates["output_dir"] = str(self.output_dir)
        return config.model_copy(update=updates) if updates else config
