"""Application commands."""

from .run_pipeline import PipelineKind, RunPipelineCommand

__all__ = ["PipelineKind", "RunPipelineCommand"]
