"""Data Transfer Objects for pipeline results and manifests."""

from typing import Optional, Union

from pydantic import BaseModel, Field

Scalar = Union[float, int, str, bool]


class SummaryRowDTO(BaseModel):
    """One planted-versus-recovered comparison."""

    quantity: str = Field(..., description="Compared quantity")
    planted: Optional[Scalar] = Field(None, description="Value put into the synthetic data")
    recovered: Optional[Scalar] = Field(None, description="Value the analysis chain produced")
    tolerance: str = Field(default="", description="Acceptance band, human readable")
    passed: Optional[bool] = Field(None, description="None when the row is informational")

    model_config = {
        "json_schema_extra": {
            "examples": [
                {
                    "quantity": "parity dwell time 1/(pi f_c) (s)",
                    "planted": 0.0059,
                    "recovered": 0.00583,
                    "tolerance": "±15%",
                    "passed": True,
                }
            ]
        }
    }


class ManifestFileDTO(BaseModel):
    """One artifact listed in a manifest."""

    path: str = Field(..., description="Path relative to the run directory")
    sha256: str = Field(..., min_length=64, max_length=64, description="Content checksum")
    size: int = Field(..., ge=0, description="Size in bytes")
    format: str = Field(..., description="Artifact format name")
    version: int = Field(default=1, ge=1, description="Format version")


class StageRecordDTO(BaseModel):
    """Outcome of one pipeline stage."""

    status: str = Field(..., pattern="^(OK|FAILED)$", description="Stage status")
    error: Optional[str] = Field(None, description="Failure message")


class RunManifestDTO(BaseModel):
    """Contents of manifest.json."""

    manifest_version: int = Field(default=1, description="Manifest format version")
    command: str = Field(..., description="Pipeline that produced the run")
    seed: int = Field(..., description="Run seed")
    config_hash: str = Field(..., description="SHA-256 of the canonical run configuration")
    files: list[ManifestFileDTO] = Field(default_factory=list, description="Emitted artifacts")
    stages: dict[str, StageRecordDTO] = Field(default_factory=dict, description="Stage outcomes")

    @property
    def failed_stages(self) -> list[str]:
        """Names of stages that failed."""
        return [name for name, record in self.stages.items() if record.status == "FAILED"]


class PipelineResultDTO(BaseModel):
    """What a pipeline run hands back to the presentation layer."""

    command: str = Field(..., description="Pipeline name")
    output_dir: str = Field(..., description="Run directory")
    manifest: RunManifestDTO = Field(..., description="Written manifest")
    headline: dict[str, Scalar] = Field(
        default_factory=dict, description="Key numbers for the console"
    )
    summary: list[SummaryRowDTO] = Field(
        default_factory=list, description="Planted-versus-recovered rows"
    )
    warnings: list[str] = Field(default_factory=list, description="Notable warnings")

    @property
    def success(self) -> bool:
        """Whether every stage completed."""
        return not self.manifest.failed_stages
