"""Traffic models: GE (generalised exponential) samplers and AIMD sources.

The GE distribution is parameterized by a mean rate and a squared
coefficient of variation (SCV >= 1).  It is realized as a compound-Poisson
batch process: batch epochs form a Poisson stream of rate tau*rate and
batch sizes are geometric with mean 1/tau, where tau = 2/(scv+1).  At
scv = 1 this collapses exactly to a plain exponential stream (batch size
identically 1, no zero-duration service phases).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "GEParams",
    "AimdSourceState",
    "ge_tau",
    "ge_sigma",
    "sample_interarrival",
    "sample_batch_size",
    "sample_service",
    "aimd_on_ack",
    "aimd_on_packet_ack",
    "aimd_on_congestion",
]


@dataclass(frozen=True)
class GEParams:
    """Mean event rate (events/second) and squared coefficient of variation.

    scv == 1 is the pure exponential case; scv > 1 models bursty traffic.
    """

    rate: float
    scv: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"GE rate must be > 0, got {self.rate}")
        if not self.scv >= 1:
            raise ValueError(f"GE scv must be >= 1, got {self.scv}")

    @property
    def tau(self) -> float:
        """Batch-success probability 2/(scv+1), in (0, 1]."""
        return 2.0 / (self.scv + 1.0)

    @property
    def sigma(self) -> float:
        """Batch-continuation probability 1 - tau, in [0, 1)."""
        return (self.scv - 1.0) / (self.scv + 1.0)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate


def ge_tau(params: GEParams) -> float:
    """Success probability of the geometric batch stage: 2/(scv+1)."""
    return params.tau


def ge_sigma(params: GEParams) -> float:
    """Continuation probability of the geometric batch stage: 1 - tau."""
    return params.sigma


def sample_interarrival(params: GEParams, rng: np.random.Generator, size=None):
    """Time until the next batch-arrival epoch.

    Batch epochs are Poisson with rate tau*rate so that the compound
    per-packet rate equals params.rate.
    """
    return rng.exponential(1.0 / (params.tau * params.rate), size)


def sample_batch_size(params: GEParams, rng: np.random.Generator, size=None):
    """Geometric batch size on {1, 2, ...} with mean 1/tau."""
    return rng.geometric(params.tau, size)


def sample_service(params: GEParams, rng: np.random.Generator, size=None):
    """GE service time: zero with probability 1-tau, else Exp(tau*rate).

    The zero-duration phase realizes the batch-departure reading of GE
    service; the mix preserves mean 1/rate and SCV == params.scv.  Two
    draws are always consumed so scalar and vectorized calls stay aligned
    on the same stream.
    """
    tau = params.tau
    scale = 1.0 / (tau * params.rate)
    u = rng.random(size)
    e = rng.exponential(scale, size)
    if size is None:
        return e if u < tau else 0.0
    return np.where(u < tau, e, 0.0)


@dataclass(frozen=True)
class AimdSourceState:
    """Window state of an additive-increase / multiplicative-decrease source.

    cwnd is kept real-valued; the sending quantum is floor(cwnd).  MSS is
    fixed at one abstract packet.
    """

    cwnd: float = 1.0
    ssthresh: float = math.inf
    rtt: float = 0.1
    in_flight: int = 0
    mss: int = 1

    def __post_init__(self):
        if not self.cwnd >= 1:
            raise ValueError(f"cwnd must be >= 1, got {self.cwnd}")
        if not self.rtt > 0:
            raise ValueError(f"rtt must be > 0, got {self.rtt}")
        if self.in_flight > math.ceil(self.cwnd):
            raise ValueError("in_flight exceeds ceiling(cwnd)")


def aimd_on_ack(state: AimdSourceState) -> AimdSourceState:
    """One full feedback round completed with no loss/mark: cwnd += 1."""
    return replace(state, cwnd=state.cwnd + 1.0)


def aimd_on_packet_ack(state: AimdSourceState) -> AimdSourceState:
    """Per-packet form of additive increase: cwnd += 1/cwnd.

    Over one window of floor(cwnd) clean acknowledgements this totals
    (almost exactly) +1 per round trip.
    """
    return replace(state, cwnd=state.cwnd + 1.0 / state.cwnd)


def aimd_on_congestion(state: AimdSourceState) -> AimdSourceState:
    """Multiplicative decrease on loss or mark: halve, floored at 1."""
    return replace(state, cwnd=max(1.0, state.cwnd / 2.0))
