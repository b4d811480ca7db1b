"""Application handlers."""

from .pipeline_handler import PipelineHandler, PipelineOutcome

__all__ = ["PipelineHandler", "PipelineOutcome"]
