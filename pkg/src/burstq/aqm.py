"""Per-packet queue-management policies.

Every policy answers the same question for an arriving packet: Accept,
Mark, or Drop.  The functions here are pure state transitions so a
simulation (or a unit test) can drive them deterministically; the engine
module owns the wiring (timers, idle detection, feedback).

Covered: Drop Tail, RED with gentle mode / ECN marking / adaptive max_p,
BLUE, REM (exponential marking on a price signal), and DECbit (router bit
plus the source window law).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

__all__ = [
    "AqmDecision",
    "RedParams",
    "RedState",
    "AredParams",
    "BlueParams",
    "BlueState",
    "BlueEvent",
    "RemParams",
    "RemState",
    "DecbitState",
    "droptail_decide",
    "red_update_avg",
    "red_pb",
    "red_pa",
    "red_decide",
    "ared_adapt",
    "blue_update",
    "blue_decide",
    "rem_update_price",
    "rem_mark_prob",
    "rem_decide",
    "decbit_advance",
    "decbit_roll_cycle",
    "decbit_router",
    "decbit_source",
    "DECBIT_DECREASE_FACTOR",
]


class AqmDecision(enum.Enum):
    """Three-way verdict for an arriving packet."""

    ACCEPT = 0
    MARK = 1
    DROP = 2


def droptail_decide(qlen: int, capacity: int) -> AqmDecision:
    """Drop exactly when the queue is full; never mark."""
    if qlen < 0 or qlen > capacity:
        raise AssertionError(f"queue invariant broken: qlen={qlen}, capacity={capacity}")
    return AqmDecision.DROP if qlen == capacity else AqmDecision.ACCEPT


# --------------------------------------------------------------------------
# RED family
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RedParams:
    """RED thresholds and EWMA weight.

    mean_tx_time is the typical per-packet transmission time used to count
    virtual EWMA samples across idle periods; the engine derives it from
    the configured service rate when left at None.
    """

    weight: float = 0.002
    min_th: float = 5.0
    max_th: float = 15.0
    max_p: float = 0.1
    gentle: bool = False
    ecn: bool = False
    mean_tx_time: float | None = None

    def __post_init__(self):
        if not 0 < self.weight <= 1:
            raise ValueError(f"weight must be in (0,1], got {self.weight}")
        if not 0 < self.min_th < self.max_th:
            raise ValueError(
                f"thresholds must satisfy 0 < min_th < max_th, got {self.min_th}, {self.max_th}"
            )
        if not 0 < self.max_p <= 1:
            raise ValueError(f"max_p must be in (0,1], got {self.max_p}")


@dataclass(frozen=True)
class RedState:
    """EWMA of the queue length plus the accepted-since-last-drop counter.

    count uses the classic convention: -1 while the average sits below
    min_th, otherwise the number of packets accepted since the last
    mark/drop.
    """

    avg: float = 0.0
    count: int = -1


def red_update_avg(
    state: RedState,
    qlen: int,
    params: RedParams,
    idle_duration: float | None = None,
) -> RedState:
    """EWMA step; an idle gap first decays the average with m virtual
    zero-length samples, m = idle_duration / mean_tx_time."""
    avg = state.avg
    if idle_duration is not None and idle_duration > 0:
        tx = params.mean_tx_time if params.mean_tx_time is not None else 1.0
        m = idle_duration / tx
        avg *= (1.0 - params.weight) ** m
    avg = (1.0 - params.weight) * avg + params.weight * qlen
    return replace(state, avg=avg)


def red_pb(avg: float, params: RedParams) -> float:
    """Base drop probability as a function of the averaged queue length.

    Non-gentle: 0 below min_th, linear to max_p on [min_th, max_th), then a
    jump to 1.  Gentle: linear from max_p at max_th up to 1 at 2*max_th,
    continuous everywhere.
    """
    if avg < params.min_th:
        return 0.0
    if avg < params.max_th:
        return params.max_p * (avg - params.min_th) / (params.max_th - params.min_th)
    if not params.gentle:
        return 1.0
    if avg < 2.0 * params.max_th:
        return params.max_p + (1.0 - params.max_p) * (avg - params.max_th) / params.max_th
    return 1.0


def red_pa(p_b: float, count: int) -> float:
    """Spread drops uniformly: p_a = p_b / (1 - count*p_b), clamped to [0,1]."""
    if p_b <= 0.0:
        return 0.0
    if p_b >= 1.0:
        return 1.0
    den = 1.0 - count * p_b
    if den <= 0.0:
        return 1.0
    return min(1.0, p_b / den)


def red_decide(
    state: RedState,
    qlen: int,
    capacity: int,
    params: RedParams,
    rng,
    idle_duration: float | None = None,
) -> tuple[AqmDecision, RedState]:
    """Full RED arrival decision.

    A physically full queue always drops.  In ECN mode probabilistic drops
    become marks while avg < max_th; the forced region still drops.  The
    inter-drop count is evaluated before being incremented, which makes the
    gap between drops exactly uniform for a fixed p_b.
    """
    state = red_update_avg(state, qlen, params, idle_duration)
    if qlen >= capacity:
        return AqmDecision.DROP, replace(state, count=0)
    avg = state.avg
    p_b = red_pb(avg, params)
    if p_b <= 0.0:
        return AqmDecision.ACCEPT, replace(state, count=-1)
    if avg >= params.max_th and not params.gentle:
        return AqmDecision.DROP, replace(state, count=0)
    count = max(state.count, 0)
    p_a = red_pa(p_b, count)
    if rng.random() < p_a:
        if params.ecn and avg < params.max_th:
            return AqmDecision.MARK, replace(state, count=0)
        return AqmDecision.DROP, replace(state, count=0)
    return AqmDecision.ACCEPT, replace(state, count=count + 1)


@dataclass(frozen=True)
class AredParams:
    """Adaptive-RED policy constants (all exposed; none are sacred).

    max_p is nudged up additively when the average sits above the target
    band (40%..60% of the way from min_th to max_th) and decayed
    multiplicatively below it.
    """

    interval: float = 0.5
    increment: float = 0.02
    decrease_factor: float = 0.9
    min_max_p: float = 0.01
    max_max_p: float = 0.5


def ared_adapt(params: RedParams, avg: float, ared: AredParams = AredParams()) -> RedParams:
    """One adaptation step, to be invoked on a fixed timer."""
    span = params.max_th - params.min_th
    lo = params.min_th + 0.4 * span
    hi = params.min_th + 0.6 * span
    if avg > hi:
        max_p = min(ared.max_max_p, params.max_p + ared.increment)
    elif avg < lo:
        max_p = max(ared.min_max_p, params.max_p * ared.decrease_factor)
    else:
        return params
    return replace(params, max_p=max_p)


# --------------------------------------------------------------------------
# BLUE
# --------------------------------------------------------------------------


class BlueEvent(enum.Enum):
    QUEUE_EXCEEDS_THRESHOLD = 0
    LINK_IDLE = 1


@dataclass(frozen=True)
class BlueParams:
    l_th: float = 10.0
    r1: float = 0.0025
    r2: float = 0.00025
    freeze_time: float = 0.1
    ecn: bool = False

    def __post_init__(self):
        if not 0 < self.r1 < 1 or not 0 < self.r2 < 1:
            raise ValueError("r1 and r2 must be in (0,1)")
        if not self.freeze_time > 0:
            raise ValueError("freeze_time must be > 0")
        if not self.l_th > 0:
            raise ValueError("l_th must be > 0")


@dataclass(frozen=True)
class BlueState:
    p_m: float = 0.0
    last_update: float = -math.inf


def blue_update(state: BlueState, event: BlueEvent, now: float, params: BlueParams) -> BlueState:
    """Step p_m by r1/r2, at most once per freeze_time."""
    if now - state.last_update < params.freeze_time:
        return state
    if event is BlueEvent.QUEUE_EXCEEDS_THRESHOLD:
        p_m = min(1.0, state.p_m + params.r1)
    else:
        p_m = max(0.0, state.p_m - params.r2)
    return BlueState(p_m=p_m, last_update=now)


def blue_decide(
    state: BlueState, qlen: int, capacity: int, rng, ecn: bool = False
) -> AqmDecision:
    """Mark/drop with probability p_m; a full queue always drops."""
    if qlen >= capacity:
        return AqmDecision.DROP
    if rng.random() < state.p_m:
        return AqmDecision.MARK if ecn else AqmDecision.DROP
    return AqmDecision.ACCEPT


# --------------------------------------------------------------------------
# REM
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RemParams:
    """Price dynamics (gamma, alpha, target backlog) and marking base phi."""

    gamma: float = 0.001
    phi: float = 1.001
    alpha: float = 0.1
    target_backlog: float = 20.0
    update_interval: float = 0.01
    ecn: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.phi > 1:
            raise ValueError("phi must be > 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.target_backlog < 0:
            raise ValueError("target_backlog must be >= 0")


@dataclass(frozen=True)
class RemState:
    price: float = 0.0
    measured_input_rate: float = 0.0


def rem_update_price(
    state: RemState,
    backlog: float,
    input_rate: float,
    capacity_rate: float,
    params: RemParams,
) -> RemState:
    """Price follows rate mismatch plus weighted backlog excess, floored at 0."""
    step = params.gamma * (
        params.alpha * (backlog - params.target_backlog) + input_rate - capacity_rate
    )
    return RemState(price=max(0.0, state.price + step), measured_input_rate=input_rate)


def rem_mark_prob(price: float, phi: float) -> float:
    """Exponential marking: 1 - phi^(-price)."""
    if price < 0:
        raise ValueError(f"price must be >= 0, got {price}")
    return 1.0 - phi ** (-price)


def rem_decide(
    state: RemState, qlen: int, capacity: int, params: RemParams, rng
) -> AqmDecision:
    if qlen >= capacity:
        return AqmDecision.DROP
    if rng.random() < rem_mark_prob(state.price, params.phi):
        return AqmDecision.MARK if params.ecn else AqmDecision.DROP
    return AqmDecision.ACCEPT


# --------------------------------------------------------------------------
# DECbit
# --------------------------------------------------------------------------

DECBIT_DECREASE_FACTOR = 0.875


@dataclass(frozen=True)
class DecbitState:
    """Queue-length time integral over the DECbit averaging window.

    The window spans the previous busy+idle cycle plus the current busy
    period; prev_* hold the completed cycle, area/window_start the running
    one.  qlen/last_time carry the piecewise-constant integrand.
    """

    prev_area: float = 0.0
    prev_duration: float = 0.0
    area: float = 0.0
    window_start: float = 0.0
    last_time: float = 0.0
    qlen: int = 0


def decbit_advance(state: DecbitState, qlen: int, now: float) -> DecbitState:
    """Account for the interval since the last change, then set qlen."""
    area = state.area + state.qlen * (now - state.last_time)
    return replace(state, area=area, qlen=qlen, last_time=now)


def decbit_roll_cycle(state: DecbitState, now: float) -> DecbitState:
    """Close the current busy+idle cycle (called when a new busy period starts)."""
    state = decbit_advance(state, state.qlen, now)
    return DecbitState(
        prev_area=state.area,
        prev_duration=now - state.window_start,
        area=0.0,
        window_start=now,
        last_time=now,
        qlen=state.qlen,
    )


def decbit_router(state: DecbitState, now: float) -> tuple[bool, DecbitState]:
    """Set the congestion bit iff the windowed mean queue length >= 1."""
    state = decbit_advance(state, state.qlen, now)
    elapsed = state.prev_duration + (now - state.window_start)
    if elapsed <= 0.0:
        return state.qlen >= 1, state
    mean = (state.prev_area + state.area) / elapsed
    return mean >= 1.0, state


def decbit_source(window_bits, cwnd: float) -> float:
    """Window law: multiplicative decrease when at least half the bits in
    the last window were set, otherwise linear increase; floor at 1."""
    bits = list(window_bits)
    if bits and sum(1 for b in bits if b) * 2 >= len(bits):
        return max(1.0, cwnd * DECBIT_DECREASE_FACTOR)
    return max(1.0, cwnd + 1.0)
