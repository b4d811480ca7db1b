"""Domain value objects."""

from .electrostatics import (
    BoundaryCondition,
    GeometryScale,
    GridGeometry,
    InducedChargeMap,
    PotentialField,
    SensitiveVolume,
)
from .inference import (
    Classification,
    DwellStatistics,
    EmissionKind,
    FlipAgreement,
    GaussianMixture,
    HiddenMarkov,
    LabelPath,
    ModelSelectionReport,
    TransitionMatrix,
)
from .processes import (
    ChargeEnvConfig,
    ChargeTrace,
    ParityPath,
    ParityProcessConfig,
    RamseyTrace,
    RelaxationTrace,
    SpectroscopyTrace,
)
from .readout import IqClusterModel, ResetBoundaries, ResetPulse, ShotRecord, ShotTable, TargetBand
from .spectra import (
    DwellEstimate,
    LorentzianFit,
    PowerLawFit,
    PsdEstimate,
    PsdMethod,
    SegmentConfig,
)
from .transmon import (
    ChargeDispersionReport,
    OffsetCorrelation,
    OffsetInversion,
    ParityBands,
    SpectrumTable,
    TransmonParams,
    TridiagonalMatrix,
)

__all__ = [
    "BoundaryCondition",
    "ChargeDispersionReport",
    "ChargeEnvConfig",
    "ChargeTrace",
    "Classification",
    "DwellEstimate",
    "DwellStatistics",
    "EmissionKind",
    "FlipAgreement",
    "GaussianMixture",
    "GeometryScale",
    "GridGeometry",
    "HiddenMarkov",
    "InducedChargeMap",
    "IqClusterModel",
    "LabelPath",
    "LorentzianFit",
    "ModelSelectionReport",
    "OffsetCorrelation",
    "OffsetInversion",
    "ParityBands",
    "ParityPath",
    "ParityProcessConfig",
    "PotentialField",
    "PowerLawFit",
    "PsdEstimate",
    "PsdMethod",
    "RamseyTrace",
    "RelaxationTrace",
    "ResetBoundaries",
    "ResetPulse",
    "SegmentConfig",
    "SensitiveVolume",
    "ShotRecord",
    "ShotTable",
    "SpectroscopyTrace",
    "SpectrumTable",
    "TargetBand",
    "TransitionMatrix",
    "TransmonParams",
    "TridiagonalMatrix",
]
