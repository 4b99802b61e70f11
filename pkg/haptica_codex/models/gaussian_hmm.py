"""
Continuous-emission hidden Markov models with Gaussian output densities.

Models are immutable; training returns a new model. All recursions run in
log space so long sequences and sharp emission densities cannot underflow.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import special

from ..errors import InsufficientData, TooShortSequence
from ..features import time_normalize


logger = structlog.get_logger()

COVARIANCE_FULL = "full"
COVARIANCE_DIAG = "diag"

TOPOLOGY_LEFT_RIGHT = "left-right"
TOPOLOGY_ERGODIC = "ergodic"

_LOG_2PI = math.log(2.0 * math.pi)

# Below this much posterior mass a state keeps its previous emission.
_MIN_OCCUPANCY = 1e-12


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


def _log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


@dataclass(frozen=True)
class TrainConfig:
    """Training parameters for left-right Gaussian HMMs."""

    n_states: int = 10
    max_iterations: int = 200
    # Minimum log-likelihood gain per observation for another EM iteration.
    tolerance: float = 1e-4
    variance_floor: float = 1e-6
    covariance: str = COVARIANCE_FULL

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError(f"n_states must be >= 2, got {self.n_states}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if not self.variance_floor > 0:
            raise ValueError(f"variance floor must be positive, got {self.variance_floor}")
        if self.covariance not in (COVARIANCE_FULL, COVARIANCE_DIAG):
            raise ValueError(f"covariance must be 'full' or 'diag', got '{self.covariance}'")


@dataclass(frozen=True)
class GaussianHmm:
    """lambda = (A, B, pi) with one Gaussian density per state."""

    transitions: np.ndarray
    initial: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    left_right: bool = True

    def __post_init__(self):
        transitions = _frozen(self.transitions)
        initial = _frozen(self.initial)
        means = np.array(self.means, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        covariances = np.array(self.covariances, dtype=float)
        n_states, dim = means.shape
        if covariances.shape == (n_states,):
            covariances = covariances[:, None, None]
        means.setflags(write=False)
        covariances.setflags(write=False)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covariances)

        if transitions.shape != (n_states, n_states) or initial.shape != (n_states,):
            raise ValueError("transition matrix, initial distribution and means disagree on N")
        if covariances.shape != (n_states, dim, dim):
            raise ValueError(f"covariances must have shape {(n_states, dim, dim)}")
        if np.any(transitions < 0) or np.any(initial < 0):
            raise ValueError("probabilities must be non-negative")
        if not np.allclose(transitions.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("transition rows must sum to 1")
        if not math.isclose(initial.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("initial distribution must sum to 1")
        if self.left_right:
            allowed = np.eye(n_states, dtype=bool) | np.eye(n_states, k=1, dtype=bool)
            if np.any(transitions[~allowed] != 0):
                raise ValueError("left-right model allows only self and next-state transitions")
            if transitions[-1, -1] != 1.0:
                raise ValueError("last state of a left-right model must be absorbing")
            if initial[0] != 1.0:
                raise ValueError("left-right model must start in the first state")
        for state, cov in enumerate(covariances):
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
                raise ValueError(f"covariance of state {state} is not symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValueError(f"covariance of state {state} is not positive definite") from None

    @property
    def n_states(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def topology(self) -> str:
        return TOPOLOGY_LEFT_RIGHT if self.left_right else TOPOLOGY_ERGODIC

    def observations(self, sequence) -> np.ndarray:
        """Coerce a sequence to a (T, D) array matching this model."""
        return as_observations(sequence, self.dim)

    def log_emission(self, sequence) -> np.ndarray:
        """log b_j(o_t) for every time step and state, shape (T, N)."""
        obs = self.observations(sequence)
        precision = np.linalg.inv(self.covariances)
        _, logdet = np.linalg.slogdet(self.covariances)
        diff = obs[:, None, :] - self.means[None, :, :]
        mahalanobis = np.einsum("tnd,nde,tne->tn", diff, precision, diff)
        return -0.5 * (self.dim * _LOG_2PI + logdet[None, :] + mahalanobis)

    def sample(self, length: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Draw a (states, observations) pair of the given length."""
        states = np.empty(length, dtype=int)
        obs = np.empty((length, self.dim))
        state = rng.choice(self.n_states, p=self.initial)
        for t in range(length):
            if t > 0:
                state = rng.choice(self.n_states, p=self.transitions[state])
            states[t] = state
            obs[t] = rng.multivariate_normal(self.means[state], self.covariances[state])
        return states, obs


def as_observations(sequence, dim: int) -> np.ndarray:
    obs = np.asarray(sequence, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[1] != dim:
        raise ValueError(f"expected observations of dimension {dim}, got shape {obs.shape}")
    if obs.shape[0] == 0:
        raise ValueError("observation sequence is empty")
    return obs


def left_right_transitions(n_states: int) -> np.ndarray:
    """Self and next-state probability 0.5 each; the last state absorbs."""
    transitions = 0.5 * (np.eye(n_states) + np.eye(n_states, k=1))
    transitions[-1, -1] = 1.0
    return transitions


def floor_covariance(cov: np.ndarray, floor: float, covariance: str = COVARIANCE_FULL) -> np.ndarray:
    """Clip a covariance so every variance (eigenvalue) is at least floor."""
    cov = 0.5 * (cov + cov.T)
    if covariance == COVARIANCE_DIAG or cov.shape[0] == 1:
        return np.diag(np.maximum(np.diag(cov), floor))
    eigvals, eigvecs = np.linalg.eigh(cov)
    clipped = (eigvecs * np.maximum(eigvals, floor)) @ eigvecs.T
    return 0.5 * (clipped + clipped.T)


def init_left_right(training: Sequence, cfg: TrainConfig) -> GaussianHmm:
    """Initial left-right model from equal time segments of the training data.

    Every sequence is time-normalized to the longest training length and cut
    into n_states contiguous parts; state j's Gaussian is fitted to part j
    pooled over all sequences.
    """
    if len(training) < 2:
        raise InsufficientData(f"need at least 2 training sequences, got {len(training)}")
    dim = np.asarray(training[0], dtype=float).reshape(len(training[0]), -1).shape[1]
    sequences = [as_observations(seq, dim) for seq in training]
    for index, seq in enumerate(sequences):
        if len(seq) < cfg.n_states:
            raise TooShortSequence(
                f"sequence {index} has {len(seq)} samples, fewer than {cfg.n_states} states"
            )

    length = max(len(seq) for seq in sequences)
    normalized = [
        np.column_stack([time_normalize(seq[:, k], length) for k in range(dim)])
        for seq in sequences
    ]
    parts = np.array_split(np.arange(length), cfg.n_states)
    means = np.empty((cfg.n_states, dim))
    covariances = np.empty((cfg.n_states, dim, dim))
    for state, part in enumerate(parts):
        pooled = np.concatenate([seq[part] for seq in normalized])
        means[state] = pooled.mean(axis=0)
        centered = pooled - means[state]
        cov = centered.T @ centered / len(pooled)
        covariances[state] = floor_covariance(cov, cfg.variance_floor, cfg.covariance)

    initial = np.zeros(cfg.n_states)
    initial[0] = 1.0
    return GaussianHmm(left_right_transitions(cfg.n_states), initial, means, covariances)


def _forward_lattice(model: GaussianHmm, log_b: np.ndarray) -> np.ndarray:
    log_alpha = np.empty_like(log_b)
    log_alpha[0] = _log(model.initial) + log_b[0]
    for t in range(1, len(log_b)):
        peak = log_alpha[t - 1].max()
        if peak == -np.inf:
            log_alpha[t:] = -np.inf
            break
        carried = np.exp(log_alpha[t - 1] - peak) @ model.transitions
        log_alpha[t] = _log(carried) + peak + log_b[t]
    return log_alpha


def _backward_lattice(model: GaussianHmm, log_b: np.ndarray) -> np.ndarray:
    log_beta = np.zeros_like(log_b)
    for t in range(len(log_b) - 2, -1, -1):
        ahead = log_b[t + 1] + log_beta[t + 1]
        peak = ahead.max()
        if peak == -np.inf:
            log_beta[: t + 1] = -np.inf
            break
        log_beta[t] = _log(model.transitions @ np.exp(ahead - peak)) + peak
    return log_beta


def forward_loglik(model: GaussianHmm, sequence) -> float:
    """Total log-likelihood log p(sequence | model) by the forward recursion."""
    log_alpha = _forward_lattice(model, model.log_emission(sequence))
    return float(special.logsumexp(log_alpha[-1]))


def viterbi(model: GaussianHmm, sequence) -> Tuple[np.ndarray, float]:
    """Most probable state path and its joint log-probability."""
    log_b = model.log_emission(sequence)
    log_a = _log(model.transitions)
    n_steps, n_states = log_b.shape
    backpointers = np.zeros((n_steps, n_states), dtype=int)
    delta = _log(model.initial) + log_b[0]
    columns = np.arange(n_states)
    for t in range(1, n_steps):
        scores = delta[:, None] + log_a
        backpointers[t] = scores.argmax(axis=0)
        delta = scores[backpointers[t], columns] + log_b[t]
    path = np.empty(n_steps, dtype=int)
    path[-1] = int(delta.argmax())
    for t in range(n_steps - 1, 0, -1):
        path[t - 1] = backpointers[t, path[t]]
    return path, float(delta.max())


@dataclass
class _Statistics:
    """Expected sufficient statistics accumulated over a training set."""

    log_likelihood: float
    start: np.ndarray
    transitions: np.ndarray
    occupancy: np.ndarray
    first: np.ndarray
    second: np.ndarray


def _expectations(model: GaussianHmm, sequences: List[np.ndarray]) -> _Statistics:
    n_states, dim = model.n_states, model.dim
    stats = _Statistics(
        0.0,
        np.zeros(n_states),
        np.zeros((n_states, n_states)),
        np.zeros(n_states),
        np.zeros((n_states, dim)),
        np.zeros((n_states, dim, dim)),
    )
    log_a = _log(model.transitions)
    for obs in sequences:
        log_b = model.log_emission(obs)
        log_alpha = _forward_lattice(model, log_b)
        log_beta = _backward_lattice(model, log_b)
        loglik = float(special.logsumexp(log_alpha[-1]))
        gamma = np.exp(log_alpha + log_beta - loglik)
        stats.log_likelihood += loglik
        stats.start += gamma[0]
        if len(obs) > 1:
            log_xi = (
                log_alpha[:-1, :, None]
                + log_a[None, :, :]
                + (log_b[1:] + log_beta[1:])[:, None, :]
                - loglik
            )
            stats.transitions += np.exp(log_xi).sum(axis=0)
        stats.occupancy += gamma.sum(axis=0)
        stats.first += gamma.T @ obs
        stats.second += np.einsum("tn,td,te->nde", gamma, obs, obs)
    return stats


def _maximize(model: GaussianHmm, stats: _Statistics, cfg: TrainConfig, n_sequences: int) -> GaussianHmm:
    initial = np.where(model.initial == 0, 0.0, stats.start / n_sequences)
    initial /= initial.sum()

    transitions = np.array(model.transitions)
    row_mass = stats.transitions.sum(axis=1)
    visited = row_mass > 0
    transitions[visited] = stats.transitions[visited] / row_mass[visited, None]
    # Forbidden transitions have zero expected count; keep them exactly zero.
    transitions[model.transitions == 0] = 0.0

    means = np.array(model.means)
    covariances = np.array(model.covariances)
    for state in range(model.n_states):
        mass = stats.occupancy[state]
        if mass < _MIN_OCCUPANCY:
            continue
        mean = stats.first[state] / mass
        cov = stats.second[state] / mass - np.outer(mean, mean)
        means[state] = mean
        covariances[state] = floor_covariance(cov, cfg.variance_floor, cfg.covariance)

    if model.left_right:
        transitions[-1, -1] = 1.0
    return GaussianHmm(transitions, initial, means, covariances, model.left_right)


def baum_welch(
    model: GaussianHmm, training: Sequence, cfg: TrainConfig
) -> Tuple[GaussianHmm, List[float]]:
    """Re-estimate a model with expectation maximization.

    Returns:
        The trained model and the training log-likelihood of every accepted
        model, starting with the input model. Iteration stops once an update
        gains less than ``cfg.tolerance`` per observation (the update is then
        discarded) or after ``cfg.max_iterations`` updates.
    """
    sequences = [model.observations(seq) for seq in training]
    if not sequences:
        raise InsufficientData("no training sequences")
    threshold = cfg.tolerance * sum(len(seq) for seq in sequences)

    stats = _expectations(model, sequences)
    trace = [stats.log_likelihood]
    for iteration in range(cfg.max_iterations):
        candidate = _maximize(model, stats, cfg, len(sequences))
        candidate_stats = _expectations(candidate, sequences)
        gain = candidate_stats.log_likelihood - stats.log_likelihood
        if gain < -1e-6:
            logger.warning("em_likelihood_decreased", iteration=iteration, gain=gain)
        if gain < threshold:
            logger.debug("em_converged", iterations=iteration, log_likelihood=trace[-1])
            break
        model, stats = candidate, candidate_stats
        trace.append(stats.log_likelihood)
        logger.debug("em_iteration", iteration=iteration, log_likelihood=trace[-1])
    else:
        logger.debug("em_max_iterations", iterations=cfg.max_iterations)
    return model, trace


def train_left_right(training: Sequence, cfg: Optional[TrainConfig] = None) -> Tuple[GaussianHmm, List[float]]:
    """Segment-initialize and then Baum-Welch train one left-right model."""
    cfg = cfg or TrainConfig()
    return baum_welch(init_left_right(training, cfg), training, cfg)
