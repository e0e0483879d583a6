"""Exact continuous-time Markov chain oracle for small PBS instances.

The state is the full FIFO queue content (a tuple of class indices, head
first, head in its exponential service phase), which keeps the chain exact
for the simulated discipline: admission by total occupancy against the
class threshold, partial batch acceptance, and GE service realized as a
zero-duration phase with probability 1 - tau_s.  Zero phases cascade at
service starts, so both service completions and batch arrivals into an
empty system jump over geometric prefixes of instant departures.

State spaces grow like R^N; anything beyond MAX_STATES raises rather than
grinding, since the simulator is the right tool at that scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .pbs import ClassTraffic, PbsThresholds, QueueDistribution

__all__ = [
    "StateSpaceError",
    "ModelError",
    "CtmcModel",
    "CtmcSolution",
    "ctmc_build",
    "ctmc_solve",
    "MAX_STATES",
    "DENSE_SOLVE_LIMIT",
]

MAX_STATES = 200_000
DENSE_SOLVE_LIMIT = 600
_RESIDUAL_TOL = 1e-10


class StateSpaceError(RuntimeError):
    """Instance too large for exact solution; use the simulator."""


class ModelError(RuntimeError):
    """Generator is singular/reducible or the solve failed its residual."""


@dataclass(frozen=True)
class CtmcModel:
    states: tuple[tuple[int, ...], ...]
    index: dict
    generator: sp.csr_matrix
    classes: tuple[ClassTraffic, ...]
    thresholds: PbsThresholds

    @property
    def n_states(self) -> int:
        return len(self.states)


def _cascade_outcomes(seq, svc_tau):
    """Service-start cascade over seq: each successive head departs
    instantly with probability 1 - tau_s of its class until one sticks or
    the queue empties.  Yields (departed_prefix_len, probability)."""
    out = []
    p = 1.0
    for j, c in enumerate(seq):
        tau = svc_tau[c]
        if tau > 0.0:
            out.append((j, p * tau))
        p *= 1.0 - tau
        if p == 0.0:
            return out
    out.append((len(seq), p))
    return out


def ctmc_build(classes, thresholds: PbsThresholds) -> CtmcModel:
    """Enumerate the reachable FIFO states and assemble the generator.

    Arrival events per class occur at the batch-epoch rate tau_a * lambda;
    a batch admits min(B, N_i - n) members.  Service completions fire at
    tau_s * mu of the head's class and are followed by the instant-departure
    cascade.  Rows sum to zero by construction of the diagonal.
    """
    classes = tuple(sorted(classes, key=lambda c: c.priority))
    R = len(classes)
    if R != thresholds.n_classes:
        raise ValueError(
            f"{R} classes but {thresholds.n_classes} thresholds configured"
        )
    for i, c in enumerate(classes):
        if c.priority != i + 1:
            raise ValueError("class priorities must be exactly 1..R")

    arr_tau = [c.arrival.tau for c in classes]
    arr_sigma = [c.arrival.sigma for c in classes]
    batch_rate = [c.arrival.tau * c.arrival.rate for c in classes]
    svc_tau = [c.service.tau for c in classes]
    svc_rate = [c.service.tau * c.service.rate for c in classes]  # exponential phase rate
    thr = thresholds.thresholds

    def transitions(state):
        """Yield (target_state, rate) pairs, self-loops excluded."""
        n = len(state)
        # batch arrivals, one event stream per class
        for c in range(R):
            room = thr[c] - n
            if room <= 0:
                continue
            nu = batch_rate[c]
            tau_a, sigma_a = arr_tau[c], arr_sigma[c]
            for k in range(1, room + 1):
                # admit exactly k members of the batch
                if k < room:
                    pk = tau_a * sigma_a ** (k - 1)
                else:
                    pk = sigma_a ** (room - 1)
                if pk == 0.0:
                    continue
                admitted = state + (c,) * k
                if n == 0:
                    # service starts now: instant-departure cascade
                    for j, pj in _cascade_outcomes(admitted, svc_tau):
                        target = admitted[j:]
                        if target != state:
                            yield target, nu * pk * pj
                else:
                    yield admitted, nu * pk
        # service completion of the head (head is in its exponential phase)
        if n > 0:
            h = state[0]
            rate = svc_rate[h]
            rest = state[1:]
            for j, pj in _cascade_outcomes(rest, svc_tau):
                target = rest[j:]
                if target != state:
                    yield target, rate * pj

    empty = ()
    index = {empty: 0}
    states = [empty]
    rows, cols, vals = [], [], []
    frontier = [empty]
    while frontier:
        nxt = []
        for state in frontier:
            si = index[state]
            diag = 0.0
            for target, rate in transitions(state):
                if target not in index:
                    if len(states) >= MAX_STATES:
                        raise StateSpaceError(
                            f"state space exceeds {MAX_STATES} states for "
                            f"N={thresholds.capacity}, R={R}"
                        )
                    index[target] = len(states)
                    states.append(target)
                    nxt.append(target)
                ti = index[target]
                rows.append(si)
                cols.append(ti)
                vals.append(rate)
                diag -= rate
            rows.append(si)
            cols.append(si)
            vals.append(diag)
        frontier = nxt

    m = len(states)
    gen = sp.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()
    return CtmcModel(
        states=tuple(states),
        index=index,
        generator=gen,
        classes=classes,
        thresholds=thresholds,
    )


@dataclass(frozen=True)
class CtmcSolution:
    """Steady state of a PBS chain with the derived performance measures.

    blocking/mql/utilization/throughput/response are per class (index 0 is
    priority 1); dist is the aggregate occupancy projection.
    """

    pi: np.ndarray
    dist: QueueDistribution
    blocking: tuple[float, ...]
    mql: tuple[float, ...]
    utilization: tuple[float, ...]
    throughput: tuple[float, ...]
    response: tuple[float, ...]
    residual: float

    @property
    def mean_qlen(self) -> float:
        return self.dist.mean()


def ctmc_solve(model: CtmcModel) -> CtmcSolution:
    """Solve pi Q = 0, sum(pi) = 1 by direct elimination and project the
    per-class measures.

    Blocking per class uses exact batch accounting at arrival epochs
    (PASTA): the expected lost fraction of a geometric batch facing room r
    is sigma^r, so pi_i = sum_s pi(s) sigma_i^[N_i - n(s)]+.
    """
    Q = model.generator
    m = Q.shape[0]
    A = Q.transpose().tolil(copy=True)
    A[m - 1, :] = 1.0  # replace one balance equation with normalization
    b = np.zeros(m)
    b[m - 1] = 1.0
    try:
        if m <= DENSE_SOLVE_LIMIT:
            pi = np.linalg.solve(A.toarray(), b)
        else:
            pi = spla.spsolve(A.tocsc(), b)
    except Exception as exc:  # singular matrix and friends
        raise ModelError(f"steady-state solve failed: {exc}") from exc
    if not np.all(np.isfinite(pi)):
        raise ModelError("steady-state solve produced non-finite entries")
    if np.any(pi < -1e-9):
        raise ModelError(f"steady-state has negative mass (min {pi.min():.3e}); chain reducible?")
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    residual = float(np.abs(pi @ Q).max())
    if residual > _RESIDUAL_TOL:
        raise ModelError(f"steady-state residual {residual:.3e} exceeds {_RESIDUAL_TOL}")

    classes = model.classes
    thr = model.thresholds.thresholds
    R = len(classes)
    N = model.thresholds.capacity

    agg = np.zeros(N + 1)
    counts = np.zeros((m, R))
    busy = np.zeros((m, R))
    room_factor = np.zeros((m, R))
    for si, state in enumerate(model.states):
        n = len(state)
        agg[n] += pi[si]
        for c in state:
            counts[si, c] += 1.0
        if n > 0:
            busy[si, state[0]] = 1.0
        for c in range(R):
            room = thr[c] - n
            sig = classes[c].arrival.sigma
            room_factor[si, c] = sig ** room if room > 0 else 1.0

    blocking = tuple(float(pi @ room_factor[:, c]) for c in range(R))
    mql = tuple(float(pi @ counts[:, c]) for c in range(R))
    utilization = tuple(float(pi @ busy[:, c]) for c in range(R))
    throughput = tuple(
        classes[c].arrival.rate * (1.0 - blocking[c]) for c in range(R)
    )
    response = tuple(
        mql[c] / throughput[c] if throughput[c] > 0 else 0.0 for c in range(R)
    )
    return CtmcSolution(
        pi=pi,
        dist=QueueDistribution(mass=agg),
        blocking=blocking,
        mql=mql,
        utilization=utilization,
        throughput=throughput,
        response=response,
        residual=residual,
    )
