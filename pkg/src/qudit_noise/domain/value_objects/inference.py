"""Statistical-inference value objects: mixtures, hidden Markov models, paths."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
from typing_extensions import Self

import numpy as np
from numpy.typing import NDArray

STOCHASTIC_ATOL = 1e-9


def _check_stochastic(matrix: NDArray[np.float64], name: str) -> None:
    if np.any(matrix < 0):
        raise ValueError(f"{name} has negative entries")
    if not np.allclose(matrix.sum(axis=-1), 1.0, atol=STOCHASTIC_ATOL, rtol=0.0):
        raise ValueError(f"{name} rows must sum to 1")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Fitted Gaussian mixture over d-dimensional observations."""

    weights: NDArray[np.float64]
    means: NDArray[np.float64]
    covariances: NDArray[np.float64]
    log_likelihood: float = float("nan")
    log_likelihood_history: tuple[float, ...] = ()
    n_observations: int = 0
    regularized: bool = False

    def __post_init__(self) -> None:
        """Validate component shapes and weights."""
        k, d = self.means.shape
        if self.weights.shape != (k,) or self.covariances.shape != (k, d, d):
            raise ValueError("Inconsistent mixture component shapes")
        if np.any(self.weights <= 0) or not np.isclose(self.weights.sum(), 1.0):
            raise ValueError("Mixture weights must be positive and sum to 1")

    @property
    def n_components(self) -> int:
        """Number of components k."""
        return int(self.weights.size)

    @property
    def dimension(self) -> int:
        """Observation dimension d."""
        return int(self.means.shape[1])

    @property
    def n_parameters(self) -> int:
        """Free parameter count of a full-covariance mixture."""
        k, d = self.n_components, self.dimension
        return k * d + k * d * (d + 1) // 2 + (k - 1)

    def bic(self) -> float:
        """Bayesian information criterion -2 logL + p ln m."""
        return -2.0 * self.log_likelihood + self.n_parameters * np.log(self.n_observations)

    def permuted(self, order: NDArray[np.int64]) -> Self:
        """Return the mixture with components reordered."""
        return type(self)(
            weights=self.weights[order],
            means=self.means[order],
            covariances=self.covariances[order],
            log_likelihood=self.log_likelihood,
            log_likelihood_history=self.log_likelihood_history,
            n_observations=self.n_observations,
            regularized=self.regularized,
        )

    def to_dict(self) -> dict[str, object]:
        """Serialize to a JSON-compatible dictionary."""
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "log_likelihood": self.log_likelihood,
            "n_observations": self.n_observations,
        }


@dataclass(frozen=True, eq=False)
class Classification:
    """Hard labels and posteriors from a mixture."""

    labels: NDArray[np.int64]
    posteriors: NDArray[np.float64]


class EmissionKind(str, Enum):
    """Emission model of a hidden Markov model."""

    CATEGORICAL = "categorical"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True, eq=False)
class HiddenMarkov:
    """Discrete-state hidden Markov model.

    Categorical emissions use ``emission_probs[state, symbol]``; Gaussian
    emissions use ``means`` and ``variances`` per state.
    """

    initial: NDArray[np.float64]
    transitions: NDArray[np.float64]
    kind: EmissionKind
    emission_probs: Optional[NDArray[np.float64]] = None
    means: Optional[NDArray[np.float64]] = None
    variances: Optional[NDArray[np.float64]] = None
    log_likelihood: float = float("nan")
    log_likelihood_history: tuple[float, ...] = ()
    converged: bool = True
    iterations: int = 0

    def __post_init__(self) -> None:
        """Validate stochasticity and emission parameters."""
        n = self.initial.size
        if self.transitions.shape != (n, n):
            raise ValueError("transitions must be (n, n)")
        _check_stochastic(self.initial, "initial distribution")
        _check_stochastic(self.transitions, "transition matrix")
        if self.kind is EmissionKind.CATEGORICAL:
            if self.emission_probs is None or self.emission_probs.shape[0] != n:
                raise ValueError("Categorical model needs emission_probs of shape (n, symbols)")
            _check_stochastic(self.emission_probs, "emission matrix")
        else:
            if self.means is None or self.variances is None:
                raise ValueError("Gaussian model needs means and variances")
            if self.means.shape != (n,) or self.variances.shape != (n,):
                raise ValueError("means and variances must have one entry per state")
            if np.any(self.variances <= 0):
                raise ValueError("Emission variances must be positive")

    @property
    def n_states(self) -> int:
        """Number of hidden states."""
        return int(self.initial.size)

    @property
    def emission_centres(self) -> NDArray[np.float64]:
        """Emission mean per state, used for canonical ordering."""
        if self.kind is EmissionKind.GAUSSIAN:
            assert self.means is not None
            return self.means
        assert self.emission_probs is not None
        return self.emission_probs @ np.arange(self.emission_probs.shape[1], dtype=np.float64)

    def permuted(self, order: NDArray[np.int64]) -> Self:
        """Return the model with hidden states relabeled in ``order``."""
        return type(self)(
            initial=self.initial[order],
            transitions=self.transitions[np.ix_(order, order)],
            kind=self.kind,
            emission_probs=None if self.emission_probs is None else self.emission_probs[order],
            means=None if self.means is None else self.means[order],
            variances=None if self.variances is None else self.variances[order],
            log_likelihood=self.log_likelihood,
            log_likelihood_history=self.log_likelihood_history,
            converged=self.converged,
            iterations=self.iterations,
        )

    def canonical(self) -> Self:
        """Return the model with states sorted by ascending emission mean."""
        return self.permuted(np.argsort(self.emission_centres, kind="stable"))

    def to_dict(self) -> dict[str, object]:
        """Serialize to a JSON-compatible dictionary."""
        payload: dict[str, object] = {
            "kind": self.kind.value,
            "initial": self.initial.tolist(),
            "transitions": self.transitions.tolist(),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
        }
        if self.emission_probs is not None:
            payload["emission_probs"] = self.emission_probs.tolist()
        if self.means is not None and self.variances is not None:
            payload["means"] = self.means.tolist()
            payload["variances"] = self.variances.tolist()
        return payload


@dataclass(frozen=True, eq=False)
class LabelPath:
    """Timestamped sequence of inferred discrete states."""

    times: NDArray[np.float64]
    states: NDArray[np.int64]
    log_likelihood: float = float("nan")

    def __post_init__(self) -> None:
        """Validate length agreement."""
        if self.times.size != self.states.size:
            raise ValueError("times and states must have the same length")

    def __len__(self) -> int:
        """Return the path length."""
        return int(self.states.size)

    @property
    def sample_interval(self) -> float:
        """Median time step, or 1 for paths shorter than two samples."""
        if self.times.size < 2:
            return 1.0
        return float(np.median(np.diff(self.times)))

    def flip_indices(self) -> NDArray[np.int64]:
        """Indices k where states[k] differs from states[k - 1]."""
        return np.flatnonzero(np.diff(self.states) != 0) + 1

    def relabeled(self, mapping: NDArray[np.int64]) -> Self:
        """Return the path with state s replaced by mapping[s]."""
        return type(self)(
            times=self.times, states=mapping[self.states], log_likelihood=self.log_likelihood
        )


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Empirical row-stochastic transition matrix between configurations."""

    probabilities: NDArray[np.float64]
    counts: NDArray[np.int64]
    temperature: Optional[float] = None
    empty_rows: tuple[int, ...] = ()
    neighbor_reach: int = 2
    duration_s: float = 0.0

    def __post_init__(self) -> None:
        """Validate stochasticity."""
        _check_stochastic(self.probabilities, "transition matrix")

    @property
    def n_states(self) -> int:
        """Number of states n."""
        return int(self.probabilities.shape[0])

    def _distance(self) -> NDArray[np.int64]:
        idx = np.arange(self.n_states)
        return np.abs(np.subtract.outer(idx, idx))

    def row_masses(self) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Per-row (diagonal, neighbour, scramble) probability masses."""
        distance = self._distance()
        p = self.probabilities
        near = (distance > 0) & (distance <= self.neighbor_reach)
        return (
            np.diag(p).copy(),
            np.where(near, p, 0.0).sum(axis=1),
            np.where(distance > self.neighbor_reach, p, 0.0).sum(axis=1),
        )

    def _count_fraction(self, mask: NDArray[np.bool_]) -> float:
        total = int(self.counts.sum())
        return float(self.counts[mask].sum() / total) if total else 0.0

    @property
    def neighbor_mass(self) -> float:
        """Fraction of all steps that are neighbour hops (0 < |d| <= reach)."""
        distance = self._distance()
        return self._count_fraction((distance > 0) & (distance <= self.neighbor_reach))

    @property
    def scramble_mass(self) -> float:
        """Fraction of all steps that are scramble jumps (|d| > reach)."""
        return self._count_fraction(self._distance() > self.neighbor_reach)

    @property
    def scramble_count(self) -> int:
        """Number of observed scramble jumps."""
        return int(self.counts[self._distance() > self.neighbor_reach].sum())

    @property
    def scramble_interval_hours(self) -> float:
        """Mean time between scramble jumps in hours."""
        count = self.scramble_count
        return float("inf") if count == 0 else self.duration_s / count / 3600.0

    def display_matrix(self, zero_diagonal: bool = True) -> NDArray[np.float64]:
        """Copy for plotting, optionally with the diagonal cleared for contrast."""
        shown = self.probabilities.copy()
        if zero_diagonal:
            shown[np.diag_indices(self.n_states)] = 0.0
        return shown

    def total_variation(self, reference: NDArray[np.float64]) -> NDArray[np.float64]:
        """Per-row total-variation distance to a reference matrix."""
        return 0.5 * np.abs(self.probabilities - reference).sum(axis=1)


@dataclass(frozen=True)
class StateDwell:
    """Dwell statistics of one state, in seconds."""

    state: int
    count: int
    mean: float
    median: float
    maximum: float


@dataclass(frozen=True, eq=False)
class DwellStatistics:
    """Run-length statistics of a label path."""

    per_state: tuple[StateDwell, ...]
    durations: NDArray[np.float64] = field(repr=False)
    run_states: NDArray[np.int64] = field(repr=False)

    @property
    def mean_stable_time(self) -> float:
        """Pooled mean dwell in seconds."""
        return float(self.durations.mean())

    @property
    def median_stable_time(self) -> float:
        """Pooled median dwell in seconds."""
        return float(np.median(self.durations))

    @property
    def max_stable_time(self) -> float:
        """Longest dwell in seconds."""
        return float(self.durations.max())

    @property
    def standard_error(self) -> float:
        """Standard error of the pooled mean, assuming exponential dwells."""
        return self.mean_stable_time / float(np.sqrt(self.durations.size))


@dataclass(frozen=True, eq=False)
class ModelSelectionReport:
    """Model-order curves and the order chosen by the elbow rule."""

    orders: NDArray[np.int64]
    silhouette: NDArray[np.float64]
    train_test_distance: NDArray[np.float64]
    bic: NDArray[np.float64]
    bic_gradient: NDArray[np.float64]
    valid: NDArray[np.bool_]
    chosen: int
    data_std: float = 0.0
    component_penalty: float = 0.0

    def rows(self) -> list[dict[str, float | int | bool]]:
        """Return one record per candidate order."""
        return [
            {
                "order": int(n),
                "silhouette": float(s),
                "train_test_distance": float(d),
                "bic": float(b),
                "bic_gradient": float(g),
                "valid": bool(v),
            }
            for n, s, d, b, g, v in zip(
                self.orders,
                self.silhouette,
                self.train_test_distance,
                self.bic,
                self.bic_gradient,
                self.valid,
            )
        ]


@dataclass(frozen=True)
class FlipAgreement:
    """Comparison of decoded flips against planted flips."""

    planted: int
    decoded: int
    matched: int
    spurious: int
    missed: int

    @property
    def spurious_fraction(self) -> float:
        """Spurious flips as a fraction of planted flips."""
        return self.spurious / self.planted if self.planted else float(self.spurious > 0)

    @property
    def count_difference_fraction(self) -> float:
        """|decoded - planted| as a fraction of planted flips."""
        return abs(self.decoded - self.planted) / self.planted if self.planted else 0.0
