"""Compiled executor for open-loop threshold-admission scenarios.

Drop Tail and PBS admission need no per-packet randomness and no policy
timers, so those runs reduce to a two-event-type loop (batch arrival,
service completion) over primitive arrays.  The kernel consumes the exact
same chunked draw streams as the reference loop in `engine`, in the same
order, so both paths produce identical trajectories; the reference path is
the semantics authority and equality is asserted in the test suite.

The kernel returns to Python whenever a draw chunk runs dry, before
touching any state for the blocked event, so a refill simply re-enters.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import engine as _eng
from .engine import CHUNK, MetricsReport, PbsConfig, SimConfig, build_streams, flow_labels

__all__ = ["run_fast"]


@njit(cache=True, nogil=True)
def _kernel(
    duration, warmup, thr,
    next_arr, fstate, istate,
    arr_tapes, arr_pos, batch_tapes, batch_pos, svc_tapes, svc_pos,
    ring_cls, ring_t,
    n_by_cls, offered, admitted, dropped, departed, carried_in,
    area_cls, busy_cls, resp_sum,
):
    F = next_arr.shape[0]
    chunk = arr_tapes.shape[1]
    ring_size = ring_cls.shape[0]
    n = istate[0]
    serving = istate[1]
    collected = istate[2]
    head = istate[3]
    last_t = fstate[0]
    next_dep = fstate[1]

    while True:
        # next event: departures win the (measure-zero) ties
        tmin = np.inf
        ev = -1
        if serving >= 0:
            tmin = next_dep
            ev = F
        for i in range(F):
            if next_arr[i] < tmin:
                tmin = next_arr[i]
                ev = i

        if ev < 0 or tmin > duration:
            if collected == 0:
                for c in range(F):
                    area_cls[c] = 0.0
                    busy_cls[c] = 0.0
                    resp_sum[c] = 0.0
                    offered[c] = 0
                    admitted[c] = 0
                    dropped[c] = 0
                    departed[c] = 0
                    carried_in[c] = n_by_cls[c]
                collected = 1
                last_t = warmup
            dt = duration - last_t
            for c in range(F):
                area_cls[c] += n_by_cls[c] * dt
            if serving >= 0:
                busy_cls[serving] += dt
            last_t = duration
            istate[0] = n
            istate[1] = serving
            istate[2] = collected
            istate[3] = head
            fstate[0] = last_t
            fstate[1] = next_dep
            return 0, 0

        # make sure every draw this event may need is available; if not,
        # hand back to Python before mutating anything
        if ev == F:
            if n > 1:
                c2 = ring_cls[(head + 1) % ring_size]
                if svc_pos[c2] >= chunk:
                    istate[0] = n
                    istate[1] = serving
                    istate[2] = collected
                    istate[3] = head
                    fstate[0] = last_t
                    fstate[1] = next_dep
                    return 3, c2
        else:
            if arr_pos[ev] >= chunk or batch_pos[ev] >= chunk or (
                n == 0 and svc_pos[ev] >= chunk
            ):
                istate[0] = n
                istate[1] = serving
                istate[2] = collected
                istate[3] = head
                fstate[0] = last_t
                fstate[1] = next_dep
                if arr_pos[ev] >= chunk:
                    return 1, ev
                if batch_pos[ev] >= chunk:
                    return 2, ev
                return 3, ev

        if collected == 0 and tmin >= warmup:
            for c in range(F):
                area_cls[c] = 0.0
                busy_cls[c] = 0.0
                resp_sum[c] = 0.0
                offered[c] = 0
                admitted[c] = 0
                dropped[c] = 0
                departed[c] = 0
                carried_in[c] = n_by_cls[c]
            collected = 1
            last_t = warmup
        dt = tmin - last_t
        for c in range(F):
            area_cls[c] += n_by_cls[c] * dt
        if serving >= 0:
            busy_cls[serving] += dt
        last_t = tmin

        if ev == F:
            ci = ring_cls[head]
            resp_sum[ci] += tmin - ring_t[head]
            departed[ci] += 1
            head = (head + 1) % ring_size
            n -= 1
            n_by_cls[ci] -= 1
            if n > 0:
                c2 = ring_cls[head]
                s = svc_tapes[c2, svc_pos[c2]]
                svc_pos[c2] += 1
                next_dep = tmin + s
                serving = c2
            else:
                serving = -1
        else:
            i = ev
            next_arr[i] = tmin + arr_tapes[i, arr_pos[i]]
            arr_pos[i] += 1
            b = batch_tapes[i, batch_pos[i]]
            batch_pos[i] += 1
            for _ in range(b):
                offered[i] += 1
                if n < thr[i]:
                    admitted[i] += 1
                    tail = (head + n) % ring_size
                    ring_cls[tail] = i
                    ring_t[tail] = tmin
                    n += 1
                    n_by_cls[i] += 1
                else:
                    dropped[i] += 1
            if serving < 0 and n > 0:
                s = svc_tapes[i, svc_pos[i]]
                svc_pos[i] += 1
                next_dep = tmin + s
                serving = i


def run_fast(config: SimConfig, replication: int = 0) -> MetricsReport:
    classes = sorted(config.classes, key=lambda c: c.priority)
    F = len(classes)
    if isinstance(config.policy, PbsConfig):
        thr = np.array(config.policy.thresholds.thresholds, dtype=np.int64)
    else:
        thr = np.full(F, config.capacity, dtype=np.int64)

    arr_draws, batch_draws, svc_draws, _ = build_streams(config, replication)

    arr_tapes = np.empty((F, CHUNK), dtype=np.float64)
    batch_tapes = np.empty((F, CHUNK), dtype=np.int64)
    svc_tapes = np.empty((F, CHUNK), dtype=np.float64)
    for i in range(F):
        arr_tapes[i] = arr_draws[i](CHUNK)
        batch_tapes[i] = batch_draws[i](CHUNK)
        svc_tapes[i] = svc_draws[i](CHUNK)
    arr_pos = np.ones(F, dtype=np.int64)  # element 0 seeds next_arr below
    batch_pos = np.zeros(F, dtype=np.int64)
    svc_pos = np.zeros(F, dtype=np.int64)
    next_arr = arr_tapes[:, 0].copy()

    ring_size = config.capacity + 1
    ring_cls = np.zeros(ring_size, dtype=np.int64)
    ring_t = np.zeros(ring_size, dtype=np.float64)

    n_by_cls = np.zeros(F, dtype=np.int64)
    offered = np.zeros(F, dtype=np.int64)
    admitted = np.zeros(F, dtype=np.int64)
    dropped = np.zeros(F, dtype=np.int64)
    departed = np.zeros(F, dtype=np.int64)
    carried_in = np.zeros(F, dtype=np.int64)
    area_cls = np.zeros(F, dtype=np.float64)
    busy_cls = np.zeros(F, dtype=np.float64)
    resp_sum = np.zeros(F, dtype=np.float64)

    istate = np.array([0, -1, 1 if config.warmup <= 0 else 0, 0], dtype=np.int64)
    fstate = np.array([0.0, 0.0], dtype=np.float64)

    while True:
        status, idx = _kernel(
            config.duration, config.warmup, thr,
            next_arr, fstate, istate,
            arr_tapes, arr_pos, batch_tapes, batch_pos, svc_tapes, svc_pos,
            ring_cls, ring_t,
            n_by_cls, offered, admitted, dropped, departed, carried_in,
            area_cls, busy_cls, resp_sum,
        )
        if status == 0:
            break
        if status == 1:
            arr_tapes[idx] = arr_draws[idx](CHUNK)
            arr_pos[idx] = 0
        elif status == 2:
            batch_tapes[idx] = batch_draws[idx](CHUNK)
            batch_pos[idx] = 0
        else:
            svc_tapes[idx] = svc_draws[idx](CHUNK)
            svc_pos[idx] = 0

    residual = n_by_cls.copy()
    marked = np.zeros(F, dtype=np.int64)  # threshold admission never marks
    return _eng._report_from_raw(
        flow_labels(config), offered, admitted, dropped, marked, departed,
        carried_in, residual, area_cls, busy_cls, resp_sum, config,
    )
