"""Partial buffer sharing: threshold admission, occupancy distributions,
and the censored blocking probability for GE batch arrivals.

Classes are indexed 1..R with class 1 the highest priority.  Class i may
join only while total occupancy is below its threshold N_i; thresholds are
non-increasing and N_1 equals the full buffer, so class 1 is limited only
by physical capacity.  With R = 1 the scheme degenerates to Drop Tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .traffic import GEParams

__all__ = [
    "PbsThresholds",
    "ClassTraffic",
    "QueueDistribution",
    "pbs_admit",
    "pbs_load_shares",
    "blocking_probability",
    "entropy",
]


@dataclass(frozen=True)
class PbsThresholds:
    """Total buffer size and the descending per-class admission thresholds."""

    capacity: int
    thresholds: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(int(t) for t in self.thresholds))
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if len(self.thresholds) < 1:
            raise ValueError("at least one threshold required")
        if self.thresholds[0] != self.capacity:
            raise ValueError(
                f"N_1 must equal the buffer capacity ({self.capacity}), got {self.thresholds[0]}"
            )
        for i, t in enumerate(self.thresholds):
            if t <= 0:
                raise ValueError(f"thresholds must be positive, got N_{i+1}={t}")
        for i in range(1, len(self.thresholds)):
            if self.thresholds[i] > self.thresholds[i - 1]:
                raise ValueError(
                    "thresholds must be non-increasing: "
                    f"N_{i+1}={self.thresholds[i]} > N_{i}={self.thresholds[i-1]}"
                )

    @property
    def n_classes(self) -> int:
        return len(self.thresholds)


@dataclass(frozen=True)
class ClassTraffic:
    """One priority class: arrival and service GE parameters."""

    arrival: GEParams
    service: GEParams
    priority: int = 1

    def __post_init__(self):
        if self.priority < 1:
            raise ValueError(f"priority must be >= 1, got {self.priority}")


def pbs_admit(class_index: int, total_occupancy: int, thresholds: PbsThresholds) -> bool:
    """Admit a class-i packet iff total occupancy is below N_i."""
    if not 1 <= class_index <= thresholds.n_classes:
        raise ValueError(
            f"class index {class_index} out of range 1..{thresholds.n_classes}"
        )
    if not 0 <= total_occupancy <= thresholds.capacity:
        raise AssertionError(
            f"occupancy invariant broken: {total_occupancy} not in 0..{thresholds.capacity}"
        )
    return total_occupancy < thresholds.thresholds[class_index - 1]


@dataclass(frozen=True)
class QueueDistribution:
    """Probability mass over total occupancy 0..N."""

    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        object.__setattr__(self, "mass", mass)
        if mass.ndim != 1 or len(mass) < 1:
            raise ValueError("mass must be a 1-D array over 0..N")
        if np.any(mass < -1e-12):
            raise ValueError(f"negative probability mass: min={mass.min()}")
        if abs(mass.sum() - 1.0) > 1e-10:
            raise ValueError(f"mass must sum to 1, got {mass.sum()!r}")

    @property
    def capacity(self) -> int:
        return len(self.mass) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.mass)), self.mass))

    def utilization(self) -> float:
        return float(1.0 - self.mass[0])

    def full_prob(self) -> float:
        return float(self.mass[-1])


def entropy(dist: QueueDistribution) -> float:
    """Shannon entropy -sum p ln p with 0 ln 0 = 0."""
    p = dist.mass
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def pbs_load_shares(classes) -> tuple[float, ...]:
    """Offered-load share of each class: (lambda_i/mu_i) / sum_j (lambda_j/mu_j)."""
    loads = [c.arrival.rate / c.service.rate for c in classes]
    total = sum(loads)
    return tuple(l / total for l in loads)


def blocking_probability(
    dist: QueueDistribution,
    cls: ClassTraffic,
    thresholds: PbsThresholds,
    load_share: float = 1.0,
) -> float:
    """Probability that an arriving class-i batch member is lost.

    pi_i = sum_k delta_i(k) * sigma_i^[N_i - k]+ * P(k), with sigma_i the
    batch-continuation probability of class i's arrivals: the geometric
    batch tail overshooting the residual room N_i - k is exactly what gets
    censored.  delta_i(0) = r_i / (r_i*sigma_i + tau_i) adjusts the empty
    state by the class's offered-load share r_i; it is 1 when R = 1 and
    irrelevant for exponential arrivals (sigma = 0 kills the k = 0 term
    whenever N_i >= 1).
    """
    sigma = cls.arrival.sigma
    tau = cls.arrival.tau
    if not 0.0 <= sigma < 1.0:
        raise ValueError(f"sigma must lie in [0,1), got {sigma}")
    if not 0.0 <= load_share <= 1.0:
        raise ValueError(f"load_share must lie in [0,1], got {load_share}")
    if dist.capacity != thresholds.capacity:
        raise ValueError(
            f"distribution support 0..{dist.capacity} does not match capacity {thresholds.capacity}"
        )
    n_i = thresholds.thresholds[cls.priority - 1]
    if load_share > 0.0:
        delta0 = load_share / (load_share * sigma + tau)
    else:
        delta0 = 0.0
    total = 0.0
    for k, p in enumerate(dist.mass):
        delta = delta0 if k == 0 else 1.0
        room = n_i - k
        factor = sigma ** room if room > 0 else 1.0
        total += delta * factor * float(p)
    return min(1.0, max(0.0, total))
