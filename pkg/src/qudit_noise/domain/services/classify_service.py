"""Statistical inference: mixtures, hidden Markov models and path statistics."""

import logging
import math
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from qudit_noise.domain.exceptions import (
    ConvergenceError,
    DataError,
    InvalidObservationError,
)
from qudit_noise.domain.services import hmm_kernels
from qudit_noise.domain.value_objects.inference import (
    Classification,
    DwellStatistics,
    EmissionKind,
    FlipAgreement,
    GaussianMixture,
    HiddenMarkov,
    LabelPath,
    ModelSelectionReport,
    StateDwell,
    TransitionMatrix,
)
from qudit_noise.domain.value_objects.processes import ChargeTrace

logger = logging.getLogger(__name__)

COVARIANCE_FLOOR = 1e-6
MIN_HMM_OBSERVATIONS = 100
DEFAULT_ORDERS = tuple(range(1, 20))
LLOYD_ITERATIONS = 10
SELF_TRANSITION_INIT = 0.9
REFIT_SEED_OFFSET = 7919
REFIT_RESTART_FACTOR = 4


def _as_matrix(observations: ArrayLike) -> NDArray[np.float64]:
    x = np.asarray(observations, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError("Observations must be 1D or 2D")
    if not np.all(np.isfinite(x)):
        raise DataError("Observations contain NaN or infinite values")
    return x


def _one_dimensional_starts(x: NDArray[np.float64], k: int) -> list[NDArray[np.float64]]:
    """Deterministic starts for scalar data: split at the k - 1 widest gaps, and at quantiles."""
    ordered = np.sort(x[:, 0])
    cuts = np.sort(np.argsort(np.diff(ordered), kind="stable")[::-1][: k - 1]) + 1
    by_gap = np.array([segment.mean() for segment in np.split(ordered, cuts)])
    by_quantile = np.array([segment.mean() for segment in np.array_split(ordered, k)])
    return [by_gap[:, None], by_quantile[:, None]]


def _component_log_density(
    x: NDArray[np.float64], means: NDArray[np.float64], covariances: NDArray[np.float64]
) -> NDArray[np.float64]:
    m, d = x.shape
    out = np.empty((m, means.shape[0]))
    for k, (mean, cov) in enumerate(zip(means, covariances)):
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            ridge = 1e-12 * (1.0 + float(np.trace(cov)))
            chol = np.linalg.cholesky(cov + ridge * np.eye(d))
        solved = np.linalg.solve(chol, (x - mean).T)
        log_det = 2.0 * np.log(np.diag(chol)).sum()
        out[:, k] = -0.5 * (np.sum(solved**2, axis=0) + log_det + d * math.log(2.0 * math.pi))
    return out


class ClassifyService:
    """Mixture classification, hidden-Markov inference and model-order selection."""

    def __init__(
        self,
        max_iterations: int = 500,
        tolerance: float = 1e-10,
        hmm_tolerance: float = 1e-8,
        hmm_max_iterations: int = 500,
    ) -> None:
        """Initialize the service.

        Args:
            max_iterations: EM iteration cap for mixtures.
            tolerance: Relative log-likelihood change that ends mixture EM.
            hmm_tolerance: Relative log-likelihood change that ends Baum-Welch.
            hmm_max_iterations: Baum-Welch iteration cap.
        """
        self.max_iterations = max_iterations
        self.tolerance = tolerance
        self.hmm_tolerance = hmm_tolerance
        self.hmm_max_iterations = hmm_max_iterations

    # ------------------------------------------------------------------ mixtures

    def gmm_fit(
        self,
        observations: ArrayLike,
        k: int,
        seed: int = 0,
        restarts: int = 3,
        min_samples_per_component: int = 10,
        init_means: Optional[ArrayLike] = None,
    ) -> GaussianMixture:
        """Fit a full-covariance Gaussian mixture by EM, keeping the best restart.

        Args:
            observations: (m,) or (m, d) samples.
            k: Number of components.
            seed: Seed for k-means++ initialization.
            restarts: Number of k-means++ initializations. Scalar data also
                starts from splits at the widest gaps and at quantiles.
            min_samples_per_component: Required samples per component.
            init_means: Optional (k, d) starting means tried before the others,
                e.g. calibration cluster centres.

        Returns:
            The GaussianMixture with the highest final log-likelihood.

        Raises:
            DataError: If k < 1 or there are too few samples.
            ConvergenceError: If an EM step decreases the likelihood beyond rounding.
        """
        x = _as_matrix(observations)
        m, d = x.shape
        if k < 1:
            raise DataError("k must be at least 1")
        seeded = None
        if init_means is not None:
            seeded = np.asarray(init_means, dtype=np.float64).reshape(k, d)
        if m < min_samples_per_component * k:
            raise DataError(
                f"{m} observations are too few for {k} components "
                f"({min_samples_per_component} per component required)"
            )
        data_cov = np.atleast_2d(np.cov(x, rowvar=False, bias=True))
        floor = COVARIANCE_FLOOR * max(float(np.trace(data_cov)) / d, 1e-300)

        starts: list[NDArray[np.float64]] = [] if seeded is None else [seeded]
        if d == 1 and k > 1:
            starts += _one_dimensional_starts(x, k)
        best: Optional[GaussianMixture] = None
        for restart in range(len(starts) + max(restarts, 1)):
            if restart < len(starts):
                centres = starts[restart]
            else:
                centres, _ = kmeans_plusplus(x, k, random_state=seed * 1009 + restart)
            fit = self._em(x, centres, data_cov, floor)
            logger.debug(f"GMM k={k} restart {restart}: logL {fit.log_likelihood:.6f}")
            if best is None or fit.log_likelihood > best.log_likelihood:
                best = fit
        assert best is not None
        if best.regularized:
            logger.warning(f"GMM k={k}: covariance ridge {floor:.3e} applied to a component")
        return best

    def _em(
        self,
        x: NDArray[np.float64],
        centres: NDArray[np.float64],
        data_cov: NDArray[np.float64],
        floor: float,
    ) -> GaussianMixture:
        m, d = x.shape
        k = centres.shape[0]
        weights = np.full(k, 1.0 / k)
        means = centres.copy()
        covs = np.tile(data_cov + floor * np.eye(d), (k, 1, 1))
        history: list[float] = []
        regularized = False
        ridged_last = False

        for _ in range(self.max_iterations):
            log_joint = _component_log_density(x, means, covs) + np.log(weights)
            log_norm = logsumexp(log_joint, axis=1)
            ll = float(log_norm.sum())
            scale = max(1.0, abs(ll))
            if history and not ridged_last and ll < history[-1] - 1e-8 * scale:
                raise ConvergenceError("EM log-likelihood decreased", history=tuple(history))
            converged = bool(history) and abs(ll - history[-1]) <= self.tolerance * scale
            history.append(ll)
            if converged:
                break

            resp = np.exp(log_joint - log_norm[:, None])
            occupancy = resp.sum(axis=0)
            alive = occupancy > 1e-12
            weights = np.where(alive, occupancy, 1e-12)
            weights = weights / weights.sum()
            ridged_last = False
            for c in np.flatnonzero(alive):
                means[c] = resp[:, c] @ x / occupancy[c]
                centred = x - means[c]
                cov = (resp[:, c, None] * centred).T @ centred / occupancy[c]
                if np.linalg.eigvalsh(cov)[0] < floor:
                    cov = cov + floor * np.eye(d)
                    regularized = True
                    ridged_last = True
                covs[c] = cov

        return GaussianMixture(
            weights=weights,
            means=means,
            covariances=covs,
            log_likelihood=history[-1],
            log_likelihood_history=tuple(history),
            n_observations=m,
            regularized=regularized,
        )

    @staticmethod
    def gmm_classify(model: GaussianMixture, observations: ArrayLike) -> Classification:
        """Assign each observation to its maximum-posterior component."""
        x = _as_matrix(observations)
        if x.shape[1] != model.dimension:
            raise DataError(
                f"Observation dimension {x.shape[1]} does not match model dimension "
                f"{model.dimension}"
            )
        log_joint = _component_log_density(x, model.means, model.covariances) + np.log(
            model.weights
        )
        posteriors = np.exp(log_joint - logsumexp(log_joint, axis=1)[:, None])
        return Classification(labels=np.argmax(posteriors, axis=1), posteriors=posteriors)

    @staticmethod
    def relabel_by_reference(
        model: GaussianMixture, reference_means: ArrayLike
    ) -> NDArray[np.int64]:
        """Map mixture components to reference states by minimum-cost matching.

        Returns:
            ``mapping[component] = state`` into the rows of ``reference_means``.
        """
        reference = np.atleast_2d(np.asarray(reference_means, dtype=np.float64))
        if reference.shape[0] < model.n_components:
            raise DataError("Need at least as many reference states as components")
        rows, cols = linear_sum_assignment(cdist(model.means, reference))
        mapping = np.empty(model.n_components, dtype=np.int64)
        mapping[rows] = cols
        return mapping

    @staticmethod
    def parity_band_reduce(labels: ArrayLike) -> NDArray[np.int64]:
        """Collapse state labels to an excitation bit: 1 for |1> or |2>, else 0."""
        values = np.asarray(labels)
        if values.size and (values.min() < 0 or values.max() > 2):
            bad = int(np.flatnonzero((values < 0) | (values > 2))[0])
            raise DataError(f"Label {values[bad]} at index {bad} is outside {{0, 1, 2}}")
        return (values >= 1).astype(np.int64)

    # ------------------------------------------------------------- hidden Markov

    @staticmethod
    def _log_emissions(model: HiddenMarkov, obs: NDArray[np.float64]) -> NDArray[np.float64]:
        if model.kind is EmissionKind.CATEGORICAL:
            assert model.emission_probs is not None
            symbols = obs.astype(np.int64)
            bad = np.flatnonzero(
                (symbols < 0) | (symbols >= model.emission_probs.shape[1]) | (symbols != obs)
            )
            if bad.size:
                raise InvalidObservationError(
                    f"Observation {obs[bad[0]]} is not a model symbol", index=int(bad[0])
                )
            with np.errstate(divide="ignore"):
                return np.log(model.emission_probs[:, symbols].T)
        assert model.means is not None and model.variances is not None
        return -0.5 * (
            (obs[:, None] - model.means) ** 2 / model.variances
            + np.log(2.0 * math.pi * model.variances)
        )

    @staticmethod
    def _shifted(log_b: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        shift = log_b.max(axis=1)
        impossible = np.flatnonzero(~np.isfinite(shift))
        if impossible.size:
            raise InvalidObservationError(
                "Observation has zero probability under every state", index=int(impossible[0])
            )
        return np.exp(log_b - shift[:, None]), shift

    def _initial_model(
        self,
        obs: NDArray[np.float64],
        n_states: int,
        kind: EmissionKind,
        n_symbols: int,
        restart: int,
        seed: int,
        init_means: Optional[NDArray[np.float64]],
    ) -> HiddenMarkov:
        rng = np.random.default_rng([seed, restart])
        off = (1.0 - SELF_TRANSITION_INIT) / (n_states - 1) if n_states > 1 else 0.0
        transitions = np.full((n_states, n_states), off)
        np.fill_diagonal(transitions, SELF_TRANSITION_INIT if n_states > 1 else 1.0)
        if restart:
            transitions *= rng.uniform(0.8, 1.2, transitions.shape)
            transitions /= transitions.sum(axis=1, keepdims=True)
        initial = np.full(n_states, 1.0 / n_states)

        if kind is EmissionKind.CATEGORICAL:
            chunks = np.array_split(np.sort(obs).astype(np.int64), n_states)
            emission = np.array(
                [np.bincount(c, minlength=n_symbols)[:n_symbols] + 1.0 for c in chunks]
            )
            if restart:
                emission *= rng.uniform(0.8, 1.2, emission.shape)
            emission /= emission.sum(axis=1, keepdims=True)
            return HiddenMarkov(initial, transitions, kind, emission_probs=emission)

        if restart == 0 and init_means is not None:
            means = np.asarray(init_means, dtype=np.float64).copy()
        elif restart == 0:
            means = np.quantile(obs, (np.arange(n_states) + 0.5) / n_states)
        else:
            centres, _ = kmeans_plusplus(obs[:, None], n_states, random_state=seed * 7919 + restart)
            means = centres[:, 0].copy()
        for _ in range(LLOYD_ITERATIONS):
            nearest = np.argmin(np.abs(obs[:, None] - means), axis=1)
            for s in range(n_states):
                members = obs[nearest == s]
                if members.size:
                    means[s] = members.mean()
        nearest = np.argmin(np.abs(obs[:, None] - means), axis=1)
        floor = self._variance_floor(obs)
        variances = np.array(
            [
                max(float(obs[nearest == s].var()), floor)
                if np.count_nonzero(nearest == s) > 1
                else max(float(obs.var()) / n_states**2, floor)
                for s in range(n_states)
            ]
        )
        return HiddenMarkov(initial, transitions, kind, means=means, variances=variances)

    @staticmethod
    def _variance_floor(obs: NDArray[np.float64]) -> float:
        return COVARIANCE_FLOOR * max(float(obs.var()), 1e-300)

    def hmm_train(
        self,
        observations: ArrayLike,
        n_states: int,
        kind: EmissionKind = EmissionKind.CATEGORICAL,
        seed: int = 0,
        restarts: int = 3,
        n_symbols: Optional[int] = None,
        init_means: Optional[ArrayLike] = None,
    ) -> HiddenMarkov:
        """Train a hidden Markov model by scaled Baum-Welch.

        Restart 0 seeds emissions from quantile chunks of the data; later
        restarts jitter (categorical) or re-seed with k-means++ (Gaussian).
        The best final log-likelihood wins and states are returned sorted by
        emission mean.

        Args:
            observations: Symbol sequence (categorical) or real sequence (Gaussian).
            n_states: Number of hidden states.
            kind: Emission model.
            seed: Initialization seed.
            restarts: Number of initializations.
            n_symbols: Categorical alphabet size; defaults to max symbol + 1 (at least 2).
            init_means: Starting Gaussian means for restart 0.

        Returns:
            The trained HiddenMarkov; ``converged`` is False if the cap was hit.

        Raises:
            DataError: If there are fewer than 100 observations or invalid symbols.
            ConvergenceError: If a Baum-Welch step lowers the log-likelihood.
        """
        obs = np.asarray(observations, dtype=np.float64).ravel()
        if obs.size < MIN_HMM_OBSERVATIONS:
            raise DataError(
                f"Hidden Markov training needs at least {MIN_HMM_OBSERVATIONS} observations"
            )
        if n_states < 1:
            raise DataError("n_states must be at least 1")
        if not np.all(np.isfinite(obs)):
            raise DataError("Observations contain NaN or infinite values")
        symbols = 0
        if kind is EmissionKind.CATEGORICAL:
            if np.any(obs < 0) or np.any(obs != np.round(obs)):
                raise DataError("Categorical observations must be non-negative integers")
            symbols = n_symbols or max(int(obs.max()) + 1, 2)
        means0 = None if init_means is None else np.asarray(init_means, dtype=np.float64)
        if means0 is not None and means0.shape != (n_states,):
            raise DataError("init_means must have one entry per state")

        best: Optional[HiddenMarkov] = None
        for restart in range(max(restarts, 1)):
            start = self._initial_model(obs, n_states, kind, symbols, restart, seed, means0)
            model = self._baum_welch(obs, start)
            logger.debug(
                f"HMM restart {restart}: logL {model.log_likelihood:.6f} "
                f"after {model.iterations} iterations"
            )
            if best is None or model.log_likelihood > best.log_likelihood:
                best = model
        assert best is not None
        if not best.converged:
            logger.warning(
                f"Baum-Welch hit the iteration cap ({self.hmm_max_iterations}) without converging"
            )
        return best.canonical()

    def _baum_welch(self, obs: NDArray[np.float64], model: HiddenMarkov) -> HiddenMarkov:
        initial = model.initial.copy()
        transitions = model.transitions.copy()
        emission = None if model.emission_probs is None else model.emission_probs.copy()
        means = None if model.means is None else model.means.copy()
        variances = None if model.variances is None else model.variances.copy()
        floor = self._variance_floor(obs)
        symbols = obs.astype(np.int64)
        history: list[float] = []
        converged = False
        current = model

        for iteration in range(1, self.hmm_max_iterations + 1):
            b, shift = self._shifted(self._log_emissions(current, obs))
            alpha, scale = hmm_kernels.forward_scaled(b, initial, transitions)
            ll = float(np.log(scale).sum() + shift.sum())
            if history and ll < history[-1] - 1e-8 * max(1.0, abs(history[-1])):
                raise ConvergenceError(
                    "Baum-Welch log-likelihood decreased", history=tuple(history + [ll])
                )
            if history and abs(ll - history[-1]) <= self.hmm_tolerance * max(1.0, abs(history[-1])):
                history.append(ll)
                converged = True
                break
            history.append(ll)
            gamma, xi = hmm_kernels.backward_accumulate(b, transitions, alpha, scale)

            initial = gamma[0] / gamma[0].sum()
            row_totals = xi.sum(axis=1)
            visited = row_totals > 0
            transitions[visited] = xi[visited] / row_totals[visited, None]
            occupancy = gamma.sum(axis=0)
            present = occupancy > 0
            if emission is not None:
                counts = np.zeros_like(emission)
                for symbol in range(emission.shape[1]):
                    counts[:, symbol] = gamma[symbols == symbol].sum(axis=0)
                emission[present] = counts[present] / occupancy[present, None]
            else:
                assert means is not None and variances is not None
                means[present] = (gamma[:, present] * obs[:, None]).sum(axis=0) / occupancy[present]
                spread = (gamma * (obs[:, None] - means) ** 2).sum(axis=0)
                variances[present] = np.maximum(spread[present] / occupancy[present], floor)

            transitions /= transitions.sum(axis=1, keepdims=True)
            current = HiddenMarkov(
                initial=initial,
                transitions=transitions.copy(),
                kind=model.kind,
                emission_probs=None if emission is None else emission.copy(),
                means=None if means is None else means.copy(),
                variances=None if variances is None else variances.copy(),
            )

        return HiddenMarkov(
            initial=current.initial,
            transitions=current.transitions,
            kind=current.kind,
            emission_probs=current.emission_probs,
            means=current.means,
            variances=current.variances,
            log_likelihood=history[-1],
            log_likelihood_history=tuple(history),
            converged=converged,
            iterations=len(history),
        )

    def hmm_viterbi(
        self,
        model: HiddenMarkov,
        observations: ArrayLike,
        times: Optional[ArrayLike] = None,
    ) -> LabelPath:
        """Decode the most probable state path.

        Args:
            model: Trained model.
            observations: Observation sequence.
            times: Timestamps; defaults to sample indices.

        Returns:
            LabelPath carrying the path log-probability.

        Raises:
            InvalidObservationError: If an observation is impossible under every state.
        """
        obs = np.asarray(observations, dtype=np.float64).ravel()
        if obs.size == 0:
            raise DataError("Cannot decode an empty sequence")
        stamps = np.arange(obs.size, dtype=np.float64) if times is None else np.asarray(times)
        log_b = self._log_emissions(model, obs)
        self._shifted(log_b)
        with np.errstate(divide="ignore"):
            path, best = hmm_kernels.viterbi_path(
                np.ascontiguousarray(log_b), np.log(model.initial), np.log(model.transitions)
            )
        return LabelPath(times=stamps.astype(np.float64), states=path, log_likelihood=float(best))

    # ---------------------------------------------------------- model selection

    @staticmethod
    def silhouette_score(
        observations: ArrayLike, labels: ArrayLike, sample_size: int = 2000, seed: int = 0
    ) -> float:
        """Mean silhouette (b - a) / max(a, b) under hard assignments.

        Singleton clusters contribute a = 0. Inputs larger than ``sample_size``
        are scored on a seeded subsample.

        Raises:
            DataError: If fewer than two clusters are present.
        """
        x = _as_matrix(observations)
        lab = np.asarray(labels)
        if x.shape[0] > sample_size:
            rng = np.random.default_rng(seed)
            pick = np.sort(rng.choice(x.shape[0], sample_size, replace=False))
            x, lab = x[pick], lab[pick]
        clusters = np.unique(lab)
        if clusters.size < 2:
            raise DataError("Silhouette needs at least two clusters")
        distances = cdist(x, x)
        members = [lab == c for c in clusters]
        mean_to = np.column_stack([distances[:, mask].sum(axis=1) for mask in members])
        sizes = np.array([mask.sum() for mask in members], dtype=np.float64)
        own = np.searchsorted(clusters, lab)
        own_size = sizes[own]
        intra = mean_to[np.arange(lab.size), own] / np.maximum(own_size - 1, 1)
        a = np.where(own_size > 1, intra, 0.0)
        other = mean_to / sizes
        other[np.arange(lab.size), own] = np.inf
        b = other.min(axis=1)
        denom = np.maximum(a, b)
        s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
        return float(s.mean())

    @staticmethod
    def _matched_distance(first: NDArray[np.float64], second: NDArray[np.float64]) -> float:
        left = list(range(first.shape[0]))
        right = list(range(second.shape[0]))
        total = 0.0
        while left and right:
            pairs = cdist(first[left], second[right])
            i, j = np.unravel_index(int(np.argmin(pairs)), pairs.shape)
            total += float(pairs[i, j])
            left.pop(int(i))
            right.pop(int(j))
        return total

    def _score_order(
        self, x: NDArray[np.float64], fit: GaussianMixture, seed: int
    ) -> tuple[float, bool]:
        """Silhouette of the hard labels, and whether every component owns a sample."""
        if fit.n_components == 1:
            return math.nan, True
        labels = self.gmm_classify(fit, x).labels
        if np.unique(labels).size < fit.n_components:
            return math.nan, False
        return self.silhouette_score(x, labels, seed=seed), True

    def _refit(
        self,
        x: NDArray[np.float64],
        current: GaussianMixture,
        seed: int,
        restarts: int,
        min_samples_per_component: int,
    ) -> GaussianMixture:
        retry = self.gmm_fit(
            x,
            current.n_components,
            seed + REFIT_SEED_OFFSET,
            REFIT_RESTART_FACTOR * max(restarts, 1),
            min_samples_per_component,
        )
        return retry if retry.log_likelihood > current.log_likelihood else current

    def select_model_order(
        self,
        q_values: ArrayLike,
        orders: Sequence[int] = DEFAULT_ORDERS,
        split: float = 0.5,
        seed: int = 0,
        restarts: int = 2,
        max_samples: int = 20000,
        min_samples_per_component: int = 10,
    ) -> ModelSelectionReport:
        """Scan mixture orders and choose one with the elbow rule.

        For each order N the pooled data gets a full mixture fit (BIC and
        silhouette) plus independent fits on a random train/test split whose
        means are matched greedily and summed into the train/test distance.
        An order whose fit leaves a component empty, or whose BIC sits above
        both neighbours, is refitted from fresh seeds with more restarts and
        keeps the better of the two fits.

        The chosen N is the smallest order that is valid and satisfies:
        every forward BIC drop from N on is at most
        max(0.1 * largest drop, 3 ln m); the train/test distance is at most a
        tenth of its maximum or 5% of the data spread; the silhouette is at
        least 0.95 of its running maximum. The BIC minimum is the fallback.

        Args:
            q_values: One-dimensional samples.
            orders: Increasing candidate orders.
            split: Training fraction of the split.
            seed: Seed for subsampling, splitting and initialization.
            restarts: EM restarts per fit.
            max_samples: Larger inputs are subsampled to this size.
            min_samples_per_component: Required samples per component.

        Returns:
            The ModelSelectionReport.
        """
        x = np.asarray(q_values, dtype=np.float64).ravel()
        rng = np.random.default_rng(seed)
        if x.size > max_samples:
            x = x[np.sort(rng.choice(x.size, max_samples, replace=False))]
        order_list = np.asarray(sorted(orders), dtype=np.int64)
        m = x.size
        n_train = int(round(split * m))
        if min(n_train, m - n_train) < min_samples_per_component * int(order_list[-1]):
            raise DataError(f"{m} samples are too few for order {order_list[-1]}")
        shuffled = rng.permutation(m)
        train, test = x[shuffled[:n_train]], x[shuffled[n_train:]]

        sil = np.full(order_list.size, np.nan)
        dist = np.empty(order_list.size)
        bic = np.empty(order_list.size)
        valid = np.ones(order_list.size, dtype=bool)
        fits: list[GaussianMixture] = []
        for idx, n in enumerate(order_list):
            order = int(n)
            full = self.gmm_fit(x, order, seed, restarts, min_samples_per_component)
            sil[idx], valid[idx] = self._score_order(x, full, seed)
            if not valid[idx]:
                logger.debug(f"Order {order}: empty cluster, refitting")
                full = self._refit(x, full, seed, restarts, min_samples_per_component)
                sil[idx], valid[idx] = self._score_order(x, full, seed)
            fits.append(full)
            bic[idx] = full.bic()
            fit_train = self.gmm_fit(train, order, seed + 1, restarts, min_samples_per_component)
            fit_test = self.gmm_fit(test, order, seed + 2, restarts, min_samples_per_component)
            dist[idx] = self._matched_distance(fit_train.means, fit_test.means)
            logger.info(
                f"Order {order}: BIC {bic[idx]:.2f}, silhouette {sil[idx]:.4f}, "
                f"train/test distance {dist[idx]:.4g}"
            )

        # A BIC above both neighbours marks a fit stuck in a local optimum.
        for idx in range(1, order_list.size - 1):
            if bic[idx] <= max(bic[idx - 1], bic[idx + 1]):
                continue
            refit = self._refit(x, fits[idx], seed, restarts, min_samples_per_component)
            if refit is not fits[idx]:
                fits[idx] = refit
                bic[idx] = refit.bic()
                sil[idx], valid[idx] = self._score_order(x, refit, seed)
                logger.info(f"Order {int(order_list[idx])}: refit BIC {bic[idx]:.2f}")
        for idx in np.flatnonzero(~valid):
            logger.debug(f"Order {int(order_list[idx])}: empty cluster, marked invalid")

        gradient = np.full(order_list.size, np.nan)
        gradient[:-1] = np.diff(bic)
        drops = -gradient
        component_penalty = 3.0 * math.log(m)
        finite = drops[np.isfinite(drops)]
        threshold = max(0.1 * float(finite.max()) if finite.size else 0.0, component_penalty)
        data_std = float(x.std())
        dist_limit = max(0.1 * float(dist.max()), 0.05 * data_std)

        chosen = int(order_list[int(np.argmin(bic))])
        running = -np.inf
        for idx, n in enumerate(order_list):
            if valid[idx] and np.isfinite(sil[idx]):
                running = max(running, float(sil[idx]))
            if not valid[idx]:
                continue
            tail = drops[idx:]
            plateau_bic = bool(np.all(tail[np.isfinite(tail)] <= threshold))
            plateau_dist = dist[idx] <= dist_limit
            plateau_sil = int(n) == 1 or (
                np.isfinite(sil[idx]) and sil[idx] >= 0.95 * running
            )
            if plateau_bic and plateau_dist and plateau_sil:
                chosen = int(n)
                break
        logger.info(f"Model-order selection chose N = {chosen}")
        return ModelSelectionReport(
            orders=order_list,
            silhouette=sil,
            train_test_distance=dist,
            bic=bic,
            bic_gradient=gradient,
            valid=valid,
            chosen=chosen,
            data_std=data_std,
            component_penalty=component_penalty,
        )

    @staticmethod
    def compare_cluster_fits(
        pooled: GaussianMixture, per_temperature: Mapping[float, GaussianMixture]
    ) -> dict[float, float]:
        """Largest matched-mean distance between the pooled and each per-temperature fit."""
        result: dict[float, float] = {}
        for temperature, fit in per_temperature.items():
            distances = cdist(pooled.means, fit.means)
            rows, cols = linear_sum_assignment(distances)
            result[temperature] = float(distances[rows, cols].max())
        return result

    # ------------------------------------------------------------- path statistics

    @staticmethod
    def transition_matrix(
        path: LabelPath,
        n: int,
        temperature: Optional[float] = None,
        neighbor_reach: int = 2,
    ) -> TransitionMatrix:
        """Row-normalized bigram counts of a label path.

        Rows of never-visited states are reported as uniform and flagged.
        """
        states = path.states
        if states.size and (states.min() < 0 or states.max() >= n):
            raise DataError(f"Path labels must lie in [0, {n})")
        counts = np.zeros((n, n), dtype=np.int64)
        np.add.at(counts, (states[:-1], states[1:]), 1)
        totals = counts.sum(axis=1)
        empty = tuple(int(i) for i in np.flatnonzero(totals == 0))
        probabilities = np.full((n, n), 1.0 / n)
        filled = totals > 0
        probabilities[filled] = counts[filled] / totals[filled, None]
        if empty:
            logger.warning(f"Transition rows {list(empty)} were never visited; set to uniform")
        return TransitionMatrix(
            probabilities=probabilities,
            counts=counts,
            temperature=temperature,
            empty_rows=empty,
            neighbor_reach=neighbor_reach,
            duration_s=len(path) * path.sample_interval,
        )

    @staticmethod
    def dwell_times(path: LabelPath) -> DwellStatistics:
        """Run-length statistics of a path, per state and pooled."""
        states = path.states
        if states.size == 0:
            raise DataError("Cannot compute dwell times of an empty path")
        starts = np.concatenate([[0], path.flip_indices()])
        lengths = np.diff(np.concatenate([starts, [states.size]]))
        run_states = states[starts]
        durations = lengths * path.sample_interval
        per_state = tuple(
            StateDwell(
                state=int(s),
                count=int(np.count_nonzero(run_states == s)),
                mean=float(durations[run_states == s].mean()),
                median=float(np.median(durations[run_states == s])),
                maximum=float(durations[run_states == s].max()),
            )
            for s in np.unique(run_states)
        )
        return DwellStatistics(per_state=per_state, durations=durations, run_states=run_states)

    @staticmethod
    def fuse_parity_paths(even_path: LabelPath, odd_path: LabelPath) -> LabelPath:
        """Combine even- and odd-band excitation paths into one parity path.

        Each even-band sample is paired with the nearest odd-band sample, ties
        going to the later one. An excited even band alone means even parity
        (0), an excited odd band alone means odd parity (1); pairs where both or
        neither band is excited hold the previous value.
        """
        if len(even_path) == 0 or len(odd_path) == 0:
            raise DataError("Both band paths must be non-empty")
        right = np.clip(np.searchsorted(odd_path.times, even_path.times), 0, len(odd_path) - 1)
        left = np.clip(right - 1, 0, len(odd_path) - 1)
        nearer_left = np.abs(odd_path.times[left] - even_path.times) < np.abs(
            odd_path.times[right] - even_path.times
        )
        odd = odd_path.states[np.where(nearer_left, left, right)]
        even = even_path.states
        decided = np.where(even != odd, np.where(even == 1, 0, 1), -1)
        known = np.flatnonzero(decided >= 0)
        parity = np.zeros(even.size, dtype=np.int64)
        if known.size:
            carry = np.maximum.accumulate(np.where(decided >= 0, np.arange(even.size), -1))
            parity = decided[np.where(carry >= 0, carry, known[0])]
        return LabelPath(times=even_path.times.copy(), states=parity)

    @staticmethod
    def flip_agreement(decoded: LabelPath, planted: LabelPath, tolerance: int = 1) -> FlipAgreement:
        """Match decoded flips to planted flips within ``tolerance`` samples."""
        if len(decoded) != len(planted):
            raise DataError("Decoded and planted paths must share the sample grid")
        found = decoded.flip_indices()
        truth = planted.flip_indices()
        matched = 0
        j = 0
        for index in found:
            while j < truth.size and truth[j] < index - tolerance:
                j += 1
            if j < truth.size and abs(int(truth[j]) - int(index)) <= tolerance:
                matched += 1
                j += 1
        return FlipAgreement(
            planted=int(truth.size),
            decoded=int(found.size),
            matched=matched,
            spurious=int(found.size) - matched,
            missed=int(truth.size) - matched,
        )

    @staticmethod
    def histogram_self_similarity(
        trace: ChargeTrace, bin_hours: float = 17.0, bins: int = 50
    ) -> NDArray[np.float64]:
        """Pairwise total-variation distances between offset histograms of time bins."""
        width = bin_hours * 3600.0
        index = ((trace.times - trace.times[0]) // width).astype(np.int64)
        histograms = []
        for b in np.unique(index):
            counts, _ = np.histogram(trace.q[index == b], bins=bins, range=(0.0, 0.5))
            histograms.append(counts / max(counts.sum(), 1))
        stacked = np.asarray(histograms)
        return 0.5 * np.abs(stacked[:, None, :] - stacked[None, :, :]).sum(axis=2)
