"""Deterministic discrete-event engine: sources, one queue+server, one
policy, and the five performance measures.

Events are dispatched in (time, sequence) order; every random draw comes
from a per-entity substream derived from the master seed, so the entire
trajectory is a pure function of (config, seed) and swapping the policy
never perturbs the arrival processes.  Open-loop scenarios with pure
threshold admission (Drop Tail / PBS) are transparently offloaded to a
compiled kernel that consumes the exact same draw streams; `fast=False`
forces the reference loop.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .aqm import (
    AredParams,
    BlueEvent,
    BlueParams,
    BlueState,
    DecbitState,
    RedParams,
    RedState,
    RemParams,
    RemState,
    ared_adapt,
    blue_decide,
    blue_update,
    decbit_advance,
    decbit_roll_cycle,
    decbit_router,
    red_decide,
    rem_decide,
    rem_update_price,
)
from .pbs import ClassTraffic, PbsThresholds
from .traffic import GEParams

__all__ = [
    "DropTailConfig",
    "RedConfig",
    "BlueConfig",
    "RemConfig",
    "DecbitConfig",
    "PbsConfig",
    "AimdConfig",
    "SimConfig",
    "ClassMetrics",
    "MetricsReport",
    "EngineError",
    "run",
    "run_replications",
    "little_check",
    "CHUNK",
]

# One chunk size shared by the reference loop and the compiled kernel keeps
# their draw streams bit-identical.
CHUNK = 1 << 14

ACCEPT, MARK, DROP = 0, 1, 2
_EV_ARRIVAL, _EV_DEPART, _EV_SEND, _EV_FEEDBACK, _EV_TIMER = 0, 1, 2, 3, 4


class EngineError(RuntimeError):
    """Broken engine invariant (conservation, event ordering)."""


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DropTailConfig:
    kind = "droptail"


@dataclass(frozen=True)
class RedConfig:
    kind = "red"
    params: RedParams = RedParams()
    ared: AredParams | None = None


@dataclass(frozen=True)
class BlueConfig:
    kind = "blue"
    params: BlueParams = BlueParams()


@dataclass(frozen=True)
class RemConfig:
    kind = "rem"
    params: RemParams = RemParams()


@dataclass(frozen=True)
class DecbitConfig:
    kind = "decbit"


@dataclass(frozen=True)
class PbsConfig:
    kind = "pbs"
    thresholds: PbsThresholds = None  # required

    def __post_init__(self):
        if self.thresholds is None:
            raise ValueError("pbs policy requires thresholds")


@dataclass(frozen=True)
class AimdConfig:
    """Closed-loop window source: constant RTT, unit MSS, real-valued cwnd."""

    rtt: float
    cwnd0: float = 1.0
    label: str | None = None

    def __post_init__(self):
        if not self.rtt > 0:
            raise ValueError(f"rtt must be > 0, got {self.rtt}")
        if not self.cwnd0 >= 1:
            raise ValueError(f"cwnd0 must be >= 1, got {self.cwnd0}")


@dataclass(frozen=True)
class SimConfig:
    capacity: int
    policy: object = field(default_factory=DropTailConfig)
    classes: tuple[ClassTraffic, ...] = ()
    aimd: tuple[AimdConfig, ...] = ()
    aimd_service: GEParams | None = None
    duration: float = 1000.0
    warmup: float | None = None
    seed: int = 0
    replications: int = 1

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "aimd", tuple(self.aimd))
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.1 * self.duration)
        if not 0 <= self.warmup < self.duration:
            raise ValueError(
                f"warmup must lie in [0, duration), got {self.warmup} vs {self.duration}"
            )
        if not self.classes and not self.aimd:
            raise ValueError("at least one traffic source required")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        prios = sorted(c.priority for c in self.classes)
        if prios != list(range(1, len(self.classes) + 1)):
            raise ValueError("class priorities must be exactly 1..R")
        if self.aimd and self.aimd_service is None:
            raise ValueError("aimd sources require aimd_service parameters")
        if isinstance(self.policy, PbsConfig):
            if self.aimd:
                raise ValueError("pbs policy supports open-loop classes only")
            if not self.classes:
                raise ValueError("pbs policy requires at least one traffic class")
            thr = self.policy.thresholds
            if thr.n_classes != len(self.classes):
                raise ValueError(
                    f"{len(self.classes)} classes but {thr.n_classes} thresholds"
                )
            if thr.capacity != self.capacity:
                raise ValueError(
                    f"thresholds capacity {thr.capacity} != buffer capacity {self.capacity}"
                )


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

CI_METRICS = (
    "offered_rate",
    "throughput",
    "loss_prob",
    "mark_rate",
    "mql",
    "utilization",
    "mean_response",
)


@dataclass(frozen=True)
class ClassMetrics:
    offered: int
    admitted: int
    dropped: int
    marked: int
    departed: int
    carried_in: int
    residual: int
    offered_rate: float
    throughput: float
    loss_prob: float
    mark_rate: float
    mql: float
    utilization: float
    mean_response: float


@dataclass(frozen=True)
class MetricsReport:
    """Per-class and aggregate measures over the post-warmup window.

    mql counts packets in system (waiting plus in service); mean_response
    is the admission-to-departure sojourn.  ci holds 95% half-widths per
    label and metric when built from more than one replication.
    """

    per_class: dict
    aggregate: ClassMetrics
    duration: float
    warmup: float
    seed: int
    replications: int = 1
    ci: dict | None = None

    @property
    def window(self) -> float:
        return self.duration - self.warmup

    def labels(self):
        return list(self.per_class.keys())


def _class_metrics(off, adm, drp, mrk, dep, car, res, area, busy, rsum, window):
    return ClassMetrics(
        offered=int(off),
        admitted=int(adm),
        dropped=int(drp),
        marked=int(mrk),
        departed=int(dep),
        carried_in=int(car),
        residual=int(res),
        offered_rate=off / window,
        throughput=dep / window,
        loss_prob=drp / off if off else 0.0,
        mark_rate=mrk / off if off else 0.0,
        mql=area / window,
        utilization=busy / window,
        mean_response=rsum / dep if dep else 0.0,
    )


def _report_from_raw(
    labels, offered, admitted, dropped, marked, departed, carried_in, residual,
    area_cls, busy_cls, resp_sum, config,
):
    window = config.duration - config.warmup
    per_class = {}
    for i, lab in enumerate(labels):
        if admitted[i] + carried_in[i] != departed[i] + residual[i]:
            raise EngineError(
                f"conservation violated for {lab}: admitted {admitted[i]} + carried "
                f"{carried_in[i]} != departed {departed[i]} + residual {residual[i]}"
            )
        if offered[i] != admitted[i] + dropped[i]:
            raise EngineError(f"offered != admitted + dropped for {lab}")
        per_class[lab] = _class_metrics(
            offered[i], admitted[i], dropped[i], marked[i], departed[i],
            carried_in[i], residual[i], area_cls[i], busy_cls[i], resp_sum[i], window,
        )
    agg = _class_metrics(
        sum(offered), sum(admitted), sum(dropped), sum(marked), sum(departed),
        sum(carried_in), sum(residual), sum(area_cls), sum(busy_cls), sum(resp_sum),
        window,
    )
    return MetricsReport(
        per_class=per_class,
        aggregate=agg,
        duration=config.duration,
        warmup=config.warmup,
        seed=config.seed,
    )


def little_check(report: MetricsReport) -> float:
    """Relative Little's-law residual |L - lambda_eff * W| / L (0 when empty)."""
    agg = report.aggregate
    if agg.mql <= 0.0:
        return 0.0
    window = (report.duration - report.warmup) * report.replications
    lam = agg.admitted / window
    return abs(agg.mql - lam * agg.mean_response) / agg.mql


# --------------------------------------------------------------------------
# Draw streams
# --------------------------------------------------------------------------


class Tape:
    """Chunked stream of draws from one dedicated Generator.

    Both execution paths pull CHUNK draws at a time, so their streams agree
    exactly.  `next` doubles as `random` so a Tape can stand in for a
    Generator in the pure policy functions.
    """

    __slots__ = ("_draw", "_buf", "_pos")

    def __init__(self, draw):
        self._draw = draw
        self._buf = []
        self._pos = 0

    def next(self):
        if self._pos >= len(self._buf):
            self._buf = self._draw(CHUNK).tolist()
            self._pos = 0
        v = self._buf[self._pos]
        self._pos += 1
        return v

    def random(self):
        return self.next()

    def chunk(self):
        return self._draw(CHUNK)


def _interarrival_draw(params: GEParams, rng):
    scale = 1.0 / (params.tau * params.rate)
    return lambda n: rng.exponential(scale, n)


def _batch_draw(params: GEParams, rng):
    tau = params.tau
    return lambda n: rng.geometric(tau, n)


def _service_draw(params: GEParams, rng):
    tau = params.tau
    scale = 1.0 / (tau * params.rate)

    def draw(n):
        u = rng.random(n)
        e = rng.exponential(scale, n)
        return np.where(u < tau, e, 0.0)

    return draw


def _uniform_draw(rng):
    return lambda n: rng.random(n)


def build_streams(config: SimConfig, replication: int):
    """Deterministic substream layout for one replication.

    Order: per-flow (interarrival, batch) generator pairs, then per-class
    service generators (open-loop classes, then the shared AIMD service),
    then the policy stream.  Returns the raw draw callables so either
    execution path can wrap them.
    """
    n_open = len(config.classes)
    n_aimd = len(config.aimd)
    n_flows = n_open + n_aimd
    n_svc = n_open + (1 if n_aimd else 0)
    root = np.random.SeedSequence(entropy=config.seed, spawn_key=(replication,))
    children = root.spawn(2 * n_flows + n_svc + 1)
    gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
    arr_draws, batch_draws = [], []
    for i, cls in enumerate(config.classes):
        arr_draws.append(_interarrival_draw(cls.arrival, gens[2 * i]))
        batch_draws.append(_batch_draw(cls.arrival, gens[2 * i + 1]))
    svc_draws = []
    base = 2 * n_flows
    for i, cls in enumerate(config.classes):
        svc_draws.append(_service_draw(cls.service, gens[base + i]))
    if n_aimd:
        svc_draws.append(_service_draw(config.aimd_service, gens[base + n_open]))
    policy_draw = _uniform_draw(gens[-1])
    return arr_draws, batch_draws, svc_draws, policy_draw


# --------------------------------------------------------------------------
# Policy adapters (engine-facing wrappers around the pure aqm functions)
# --------------------------------------------------------------------------


class _BasePolicy:
    timer_interval = None

    def decide(self, cls, n, now):
        raise NotImplementedError

    def on_enqueue(self, n, now):
        pass

    def on_depart(self, n, now):
        pass

    def on_idle(self, now):
        pass

    def on_timer(self, now, n, offered_total):
        pass


class _DropTailPolicy(_BasePolicy):
    def __init__(self, capacity):
        self.capacity = capacity

    def decide(self, cls, n, now):
        return DROP if n >= self.capacity else ACCEPT


class _PbsPolicy(_BasePolicy):
    def __init__(self, thresholds: PbsThresholds):
        self.thr = thresholds.thresholds

    def decide(self, cls, n, now):
        return ACCEPT if n < self.thr[cls] else DROP


class _RedPolicy(_BasePolicy):
    def __init__(self, cfg: RedConfig, capacity, mean_tx_time, tape):
        params = cfg.params
        if params.mean_tx_time is None:
            params = replace(params, mean_tx_time=mean_tx_time)
        self.params = params
        self.ared = cfg.ared
        self.timer_interval = cfg.ared.interval if cfg.ared else None
        self.state = RedState()
        self.capacity = capacity
        self.tape = tape
        self.empty_since = 0.0
        self.forced_drops = 0  # physical-full or hard avg>=max_th drops

    def decide(self, cls, n, now):
        idle = None
        if n == 0 and self.empty_since is not None:
            idle = now - self.empty_since
        dec, self.state = red_decide(
            self.state, n, self.capacity, self.params, self.tape, idle
        )
        if dec.value == DROP and (
            n >= self.capacity
            or (self.state.avg >= self.params.max_th and not self.params.gentle)
        ):
            self.forced_drops += 1
        return dec.value

    def on_enqueue(self, n, now):
        self.empty_since = None

    def on_idle(self, now):
        self.empty_since = now

    def on_timer(self, now, n, offered_total):
        self.params = ared_adapt(self.params, self.state.avg, self.ared)


class _BluePolicy(_BasePolicy):
    def __init__(self, cfg: BlueConfig, capacity, tape):
        self.params = cfg.params
        self.state = BlueState()
        self.capacity = capacity
        self.tape = tape

    def decide(self, cls, n, now):
        if n > self.params.l_th:
            self.state = blue_update(
                self.state, BlueEvent.QUEUE_EXCEEDS_THRESHOLD, now, self.params
            )
        return blue_decide(self.state, n, self.capacity, self.tape, self.params.ecn).value

    def on_idle(self, now):
        self.state = blue_update(self.state, BlueEvent.LINK_IDLE, now, self.params)


class _RemPolicy(_BasePolicy):
    def __init__(self, cfg: RemConfig, capacity, capacity_rate, tape):
        self.params = cfg.params
        self.timer_interval = cfg.params.update_interval
        self.state = RemState()
        self.capacity = capacity
        self.capacity_rate = capacity_rate
        self.tape = tape
        self.last_offered = 0

    def decide(self, cls, n, now):
        return rem_decide(self.state, n, self.capacity, self.params, self.tape).value

    def on_timer(self, now, n, offered_total):
        rate = (offered_total - self.last_offered) / self.params.update_interval
        self.last_offered = offered_total
        self.state = rem_update_price(self.state, n, rate, self.capacity_rate, self.params)


class _DecbitPolicy(_BasePolicy):
    def __init__(self, capacity):
        self.capacity = capacity
        self.state = DecbitState()

    def decide(self, cls, n, now):
        if n == 0:
            self.state = decbit_roll_cycle(self.state, now)
        bit, self.state = decbit_router(self.state, now)
        if n >= self.capacity:
            return DROP
        return MARK if bit else ACCEPT

    def on_enqueue(self, n, now):
        self.state = decbit_advance(self.state, n, now)

    def on_depart(self, n, now):
        self.state = decbit_advance(self.state, n, now)


def _capacity_rate(config: SimConfig) -> float:
    """Effective service rate seen by rate-matching policies: the
    offered-load-weighted harmonic mean over open-loop classes, or the AIMD
    service rate when only closed-loop sources exist."""
    if config.classes:
        lam = sum(c.arrival.rate for c in config.classes)
        load = sum(c.arrival.rate / c.service.rate for c in config.classes)
        return lam / load
    return config.aimd_service.rate


def _mean_tx_time(config: SimConfig) -> float:
    return 1.0 / _capacity_rate(config)


def _build_policy(config: SimConfig, policy_tape):
    p = config.policy
    if isinstance(p, DropTailConfig):
        return _DropTailPolicy(config.capacity)
    if isinstance(p, PbsConfig):
        return _PbsPolicy(p.thresholds)
    if isinstance(p, RedConfig):
        return _RedPolicy(p, config.capacity, _mean_tx_time(config), policy_tape)
    if isinstance(p, BlueConfig):
        return _BluePolicy(p, config.capacity, policy_tape)
    if isinstance(p, RemConfig):
        return _RemPolicy(p, config.capacity, _capacity_rate(config), policy_tape)
    if isinstance(p, DecbitConfig):
        return _DecbitPolicy(config.capacity)
    raise ValueError(f"unknown policy config: {p!r}")


def flow_labels(config: SimConfig):
    labels = [f"class{c.priority}" for c in sorted(config.classes, key=lambda c: c.priority)]
    for i, a in enumerate(config.aimd):
        labels.append(a.label or f"aimd{i + 1}")
    return labels


# --------------------------------------------------------------------------
# Reference event loop
# --------------------------------------------------------------------------


class _AimdRuntime:
    __slots__ = ("cfg", "cwnd", "in_flight", "last_cut", "cls")

    def __init__(self, cfg: AimdConfig, cls):
        self.cfg = cfg
        self.cwnd = cfg.cwnd0
        self.in_flight = 0
        self.last_cut = -math.inf
        self.cls = cls


def _run_reference(config: SimConfig, replication: int) -> MetricsReport:
    classes = sorted(config.classes, key=lambda c: c.priority)
    n_open = len(classes)
    n_aimd = len(config.aimd)
    C = n_open + n_aimd
    labels = flow_labels(config)

    arr_draws, batch_draws, svc_draws, policy_draw = build_streams(config, replication)
    arr_tapes = [Tape(d) for d in arr_draws]
    batch_tapes = [Tape(d) for d in batch_draws]
    svc_tapes = [Tape(d) for d in svc_draws]
    policy_tape = Tape(policy_draw)
    # flow -> service tape: open-loop flows map 1:1, AIMD flows share the last
    svc_of = list(range(n_open)) + [n_open] * n_aimd

    policy = _build_policy(config, policy_tape)
    aimd = [_AimdRuntime(a, n_open + i) for i, a in enumerate(config.aimd)]

    duration = config.duration
    warmup = config.warmup

    heap = []
    push, pop = heapq.heappush, heapq.heappop
    seq = 0
    for fi in range(n_open):
        push(heap, (arr_tapes[fi].next(), seq, _EV_ARRIVAL, fi))
        seq += 1
    for si, src in enumerate(aimd):
        for _ in range(int(src.cwnd)):
            push(heap, (0.0, seq, _EV_SEND, si))
            seq += 1
            src.in_flight += 1
    if policy.timer_interval:
        push(heap, (policy.timer_interval, seq, _EV_TIMER, 0))
        seq += 1

    dq = []  # FIFO of (class, admit_time); head at index `head`
    head = 0
    n = 0
    n_by_cls = [0] * C
    serving = -1

    offered = [0] * C
    admitted = [0] * C
    dropped = [0] * C
    marked = [0] * C
    departed = [0] * C
    carried_in = [0] * C
    area_cls = [0.0] * C
    busy_cls = [0.0] * C
    resp_sum = [0.0] * C
    offered_total = 0
    collected = warmup <= 0.0
    last_t = 0.0

    def advance(t):
        nonlocal collected, last_t
        if not collected and t >= warmup:
            for c in range(C):
                area_cls[c] = 0.0
                busy_cls[c] = 0.0
                resp_sum[c] = 0.0
                offered[c] = 0
                admitted[c] = 0
                dropped[c] = 0
                marked[c] = 0
                departed[c] = 0
                carried_in[c] = n_by_cls[c]
            collected = True
            last_t = warmup
        dt = t - last_t
        for c in range(C):
            area_cls[c] += n_by_cls[c] * dt
        if serving >= 0:
            busy_cls[serving] += dt
        last_t = t

    def start_service(t):
        nonlocal serving, seq
        ci = dq[head][0]
        s = svc_tapes[svc_of[ci]].next()
        push(heap, (t + s, seq, _EV_DEPART, 0))
        seq += 1
        serving = ci

    def admit_one(ci, v, t):
        nonlocal n
        admitted[ci] += 1
        if v == MARK:
            marked[ci] += 1
        dq.append((ci, t))
        n += 1
        n_by_cls[ci] += 1
        policy.on_enqueue(n, t)

    while heap:
        t, _, code, aux = pop(heap)
        if t > duration:
            break
        if t < last_t:
            raise EngineError(f"event in the past: {t} < {last_t}")
        advance(t)
        if code == _EV_ARRIVAL:
            fi = aux
            push(heap, (t + arr_tapes[fi].next(), seq, _EV_ARRIVAL, fi))
            seq += 1
            b = batch_tapes[fi].next()
            for _ in range(b):
                offered[fi] += 1
                offered_total += 1
                v = policy.decide(fi, n, t)
                if v == DROP:
                    dropped[fi] += 1
                else:
                    admit_one(fi, v, t)
            if serving < 0 and n > 0:
                start_service(t)
        elif code == _EV_DEPART:
            ci, at = dq[head]
            head += 1
            if head > 4096 and head * 2 > len(dq):
                del dq[:head]
                head = 0
            n -= 1
            n_by_cls[ci] -= 1
            departed[ci] += 1
            resp_sum[ci] += t - at
            serving = -1
            if n > 0:
                start_service(t)
            else:
                policy.on_idle(t)
            policy.on_depart(n, t)
        elif code == _EV_SEND:
            si = aux
            src = aimd[si]
            ci = src.cls
            offered[ci] += 1
            offered_total += 1
            v = policy.decide(ci, n, t)
            if v == DROP:
                dropped[ci] += 1
                sig = 1
            else:
                sig = 1 if v == MARK else 0
                admit_one(ci, v, t)
                if serving < 0:
                    start_service(t)
            push(heap, (t + src.cfg.rtt, seq, _EV_FEEDBACK, si * 2 + sig))
            seq += 1
        elif code == _EV_FEEDBACK:
            si, sig = divmod(aux, 2)
            src = aimd[si]
            src.in_flight -= 1
            if sig:
                if t - src.last_cut >= src.cfg.rtt:
                    src.cwnd = max(1.0, src.cwnd / 2.0)
                    src.last_cut = t
            else:
                src.cwnd += 1.0 / src.cwnd
            want = int(src.cwnd)
            while src.in_flight < want:
                push(heap, (t, seq, _EV_SEND, si))
                seq += 1
                src.in_flight += 1
        else:  # _EV_TIMER
            policy.on_timer(t, n, offered_total)
            push(heap, (t + policy.timer_interval, seq, _EV_TIMER, 0))
            seq += 1

    advance(duration)
    residual = list(n_by_cls)
    report = _report_from_raw(
        labels, offered, admitted, dropped, marked, departed, carried_in, residual,
        area_cls, busy_cls, resp_sum, config,
    )
    return report


# --------------------------------------------------------------------------
# Entry points
# --------------------------------------------------------------------------


def _fast_eligible(config: SimConfig) -> bool:
    if config.aimd:
        return False
    if not isinstance(config.policy, (DropTailConfig, PbsConfig)):
        return False
    if config.capacity > 2_000_000:
        return False
    return True


def run(config: SimConfig, replication: int = 0, fast: bool = True) -> MetricsReport:
    """Execute one replication and return its MetricsReport.

    Identical (config, replication) always produces an identical report;
    `fast` only selects the execution path, which consumes the same draw
    streams.
    """
    if fast and _fast_eligible(config):
        try:
            from . import fastpath
        except ImportError:
            return _run_reference(config, replication)
        return fastpath.run_fast(config, replication)
    return _run_reference(config, replication)


def _rep_worker(args):
    config, rep, fast = args
    return run(config, rep, fast)


def _mean_ci(values, n):
    import scipy.stats

    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if n < 2:
        return mean, 0.0
    sd = float(arr.std(ddof=1))
    half = float(scipy.stats.t.ppf(0.975, n - 1)) * sd / math.sqrt(n)
    return mean, half


def run_replications(
    config: SimConfig,
    n: int | None = None,
    workers: int | None = None,
    fast: bool = True,
) -> MetricsReport:
    """n independent replications (seeds split from (seed, index)).

    Counts are summed, rate/probability metrics averaged, and 95%
    half-widths reported per metric.  Results are aggregated in replication
    order, so serial and process-parallel execution give identical output.
    """
    if n is None:
        n = config.replications
    if n < 1:
        raise ValueError("replication count must be >= 1")
    tasks = [(config, r, fast) for r in range(n)]
    if workers and workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_rep_worker, tasks))
    else:
        reports = [_rep_worker(t) for t in tasks]
    if n == 1:
        return reports[0]

    labels = reports[0].labels() + ["all"]
    per_class = {}
    ci = {}
    for lab in labels:
        rows = [
            r.aggregate if lab == "all" else r.per_class[lab] for r in reports
        ]
        counts = {
            f: sum(getattr(m, f) for m in rows)
            for f in ("offered", "admitted", "dropped", "marked", "departed",
                      "carried_in", "residual")
        }
        means, halves = {}, {}
        for f in CI_METRICS:
            means[f], halves[f] = _mean_ci([getattr(m, f) for m in rows], n)
        cm = ClassMetrics(**counts, **means)
        ci[lab] = halves
        if lab == "all":
            aggregate = cm
        else:
            per_class[lab] = cm
    return MetricsReport(
        per_class=per_class,
        aggregate=aggregate,
        duration=config.duration,
        warmup=config.warmup,
        seed=config.seed,
        replications=n,
        ci=ci,
    )
