"""Belief learning from shared power samples.

Each interaction round a drone re-estimates a Gaussian for every coalition
mate from the cumulative sample history (MLE), classifies the estimate
against the known type set by KL divergence, and maintains per-type
observation frequencies that become its belief vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .game import BeliefState

SIGMA_FLOOR_FACTOR = 1e-6   # degenerate-MLE floor relative to the mean


def mle_gaussian(samples) -> tuple[float, float]:
    """Maximum-likelihood Gaussian fit: sample mean and biased (1/N)
    variance."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("at least one sample is required")
    mu = float(samples.mean())
    sigma2 = float(np.mean((samples - mu) ** 2))
    return mu, sigma2


def kl_gaussian(p: tuple[float, float], q: tuple[float, float]) -> float:
    """KL divergence (nats) between Gaussians given as (mean, std)."""
    mu1, sigma1 = p
    mu2, sigma2 = q
    if sigma2 <= 0:
        raise ValueError("reference std must be positive")
    if sigma1 <= 0:
        raise ValueError("std of the first argument must be positive")
    return (math.log(sigma2 / sigma1)
            + (sigma1 ** 2 + (mu1 - mu2) ** 2) / (2.0 * sigma2 ** 2)
            - 0.5)


def classify(estimate: tuple[float, float], type_set) -> int:
    """Type id minimizing KL(estimate -> type); ties go to the lowest id.

    ``estimate`` is (mu_hat, sigma2_hat) as produced by mle_gaussian.  A
    degenerate zero variance is floored so the comparison reduces to
    nearest-mean.
    """
    if not type_set:
        raise ValueError("type set must be non-empty")
    mu_hat, sigma2_hat = estimate
    sigma_hat = math.sqrt(max(sigma2_hat, 0.0))
    sigma_hat = max(sigma_hat, SIGMA_FLOOR_FACTOR * max(abs(mu_hat), 1.0))
    best_id, best_kl = None, math.inf
    for t in sorted(type_set, key=lambda t: t.id):
        kl = kl_gaussian((mu_hat, sigma_hat), (t.mu, t.sigma))
        if kl < best_kl:
            best_id, best_kl = t.id, kl
    return best_id


@dataclass
class ObservationLog:
    """Power samples per (observer, observed) pair with round indices."""
    samples: dict[tuple[int, int], list[float]] = field(default_factory=dict)
    rounds: dict[tuple[int, int], list[int]] = field(default_factory=dict)

    def add(self, observer: int, observed: int, sample: float,
            round_index: int) -> None:
        if observer == observed:
            raise ValueError("a drone does not observe itself")
        key = (observer, observed)
        prev = self.rounds.setdefault(key, [])
        if prev and round_index <= prev[-1]:
            raise ValueError("round indices must be strictly increasing")
        prev.append(round_index)
        self.samples.setdefault(key, []).append(float(sample))


@dataclass
class TypePrediction:
    """Per-pair classified type and per-type observation frequencies."""
    classified: dict[tuple[int, int], int]
    frequencies: dict[tuple[int, int], np.ndarray]

    def argmax_map(self) -> dict[tuple[int, int], int]:
        return dict(self.classified)


def _prefix_classifications(samples: np.ndarray, type_set,
                            window: int | None) -> np.ndarray:
    """Classified type index after each successive sample."""
    n = len(samples)
    c1 = np.concatenate([[0.0], np.cumsum(samples)])
    c2 = np.concatenate([[0.0], np.cumsum(samples ** 2)])
    idx = np.arange(1, n + 1)
    lo = np.maximum(0, idx - window) if window else np.zeros(n, dtype=int)
    cnt = idx - lo
    mean = (c1[idx] - c1[lo]) / cnt
    var = np.maximum((c2[idx] - c2[lo]) / cnt - mean ** 2, 0.0)
    sigma = np.sqrt(var)
    sigma = np.maximum(sigma, SIGMA_FLOOR_FACTOR * np.maximum(np.abs(mean), 1.0))
    types = sorted(type_set, key=lambda t: t.id)
    kls = np.stack([
        np.log(t.sigma / sigma)
        + (sigma ** 2 + (mean - t.mu) ** 2) / (2.0 * t.sigma ** 2) - 0.5
        for t in types])
    return kls.argmin(axis=0)   # argmin takes the lowest index on ties


def update_beliefs(log: ObservationLog, type_set, scenario,
                   window: int | None = None
                   ) -> tuple[BeliefState, TypePrediction]:
    """Recompute beliefs from the observation log.

    For every pair, each logged round contributes one classification event
    (MLE over the history up to that round, then KL classification); the
    belief vector is the per-type frequency of those events.  Pairs with
    no observations keep the uniform prior.
    """
    beliefs = BeliefState.uniform(scenario)
    types = sorted(type_set, key=lambda t: t.id)
    m = len(types)
    classified: dict[tuple[int, int], int] = {}
    freqs: dict[tuple[int, int], np.ndarray] = {}
    for (observer, observed), samples in log.samples.items():
        events = _prefix_classifications(np.asarray(samples, dtype=float),
                                         types, window)
        counts = np.bincount(events, minlength=m).astype(float)
        freq = counts / counts.sum()
        beliefs.set_row(observer, observed, freq)
        freqs[(observer, observed)] = freq
        classified[(observer, observed)] = types[int(freq.argmax())].id
    # unobserved pairs predict by the uniform-prior argmax (lowest id)
    ids = scenario.drone_ids
    uniform = np.full(m, 1.0 / m)
    for i in ids:
        for j in ids:
            if i != j and (i, j) not in classified:
                classified[(i, j)] = types[0].id
                freqs[(i, j)] = uniform.copy()
    return beliefs, TypePrediction(classified, freqs)


def frobenius_convergence(prediction: TypePrediction, scenario
                          ) -> tuple[np.ndarray, float]:
    """Per-type Frobenius norms of (predicted minus true) type-indicator
    matrices, and their mean.

    For type m, entry (i, j) of the prediction matrix is 1 iff drone i
    currently predicts type m for drone j; diagonals use the true type
    (each drone knows its own).  Zero norm for every type means all
    cross-predictions are correct.
    """
    ids = scenario.drone_ids
    types = sorted(scenario.type_set, key=lambda t: t.id)
    d = len(ids)
    norms = np.zeros(len(types))
    truth = {i: scenario.drone(i).true_type for i in ids}
    for k, t in enumerate(types):
        pred = np.zeros((d, d))
        true = np.zeros((d, d))
        for a, i in enumerate(ids):
            for b, j in enumerate(ids):
                predicted = truth[j] if i == j \
                    else prediction.classified[(i, j)]
                pred[a, b] = 1.0 if predicted == t.id else 0.0
                true[a, b] = 1.0 if truth[j] == t.id else 0.0
        norms[k] = np.linalg.norm(pred - true)
    return norms, float(norms.mean())
