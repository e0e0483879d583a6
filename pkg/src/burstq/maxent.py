"""Maximum-entropy occupancy distributions on 0..N.

Constraint families follow the censored-queue tradition: server
utilization (mass above zero), mean queue length, and the full-buffer
probability, next to implicit normalization.  Per-class utilization/MQL
values are accepted but collapse to their totals on the aggregate support,
where the per-class features are collinear.  The maximizer has the
exponential-family form p(k) proportional to g^[k>=1] * x^k * y^[k=N];
we solve for the coefficients numerically by Newton iterations on the
convex dual rather than transcribing any closed form.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .pbs import QueueDistribution

__all__ = [
    "MeConstraints",
    "MeInfeasibleError",
    "MeConvergenceError",
    "me_distribution",
]

_TOL = 1e-8
_MAX_ITER = 500
_THETA_LIMIT = 600.0


class MeInfeasibleError(ValueError):
    """No distribution on 0..N meets the requested constraint values."""


class MeConvergenceError(RuntimeError):
    """Dual iteration failed to reach the residual tolerance."""


def _total(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, Sequence) or isinstance(value, np.ndarray):
        return float(sum(value))
    return float(value)


@dataclass(frozen=True)
class MeConstraints:
    """Moment constraints; any field may be None (unconstrained).

    utilization and mean_qlen accept per-class sequences, summed into the
    aggregate busy probability and aggregate mean.
    """

    utilization: float | Sequence[float] | None = None
    mean_qlen: float | Sequence[float] | None = None
    full_buffer_prob: float | None = None

    @property
    def total_utilization(self) -> float | None:
        return _total(self.utilization)

    @property
    def total_mean(self) -> float | None:
        return _total(self.mean_qlen)


def _check_feasible(busy, mean, full, N):
    if busy is not None and not 0.0 < busy < 1.0:
        raise MeInfeasibleError(
            f"utilization {busy} outside the open interval (0,1)"
        )
    if full is not None and not 0.0 < full < 1.0:
        raise MeInfeasibleError(
            f"full-buffer probability {full} outside the open interval (0,1)"
        )
    if mean is not None and not 0.0 < mean < N:
        raise MeInfeasibleError(f"mean {mean} outside the open interval (0,{N})")
    if busy is not None and full is not None and full >= busy:
        raise MeInfeasibleError(
            f"full-buffer probability {full} >= utilization {busy}"
        )
    if mean is not None:
        lo, hi = 0.0, float(N)
        if busy is not None:
            lo, hi = busy, N * busy  # busy mass confined to 1..N
        if full is not None:
            lo = max(lo, N * full)
            hi = min(hi, full * N + (1.0 - full) * (N - 1))
        if busy is not None and full is not None:
            lo = max(lo, (busy - full) + N * full)
            hi = min(hi, (busy - full) * (N - 1) + N * full)
        if not lo < mean < hi:
            raise MeInfeasibleError(
                f"mean {mean} infeasible given other constraints (bounds {lo}..{hi})"
            )


def me_distribution(
    constraints: MeConstraints,
    capacity: int,
    tol: float = _TOL,
    max_iter: int = _MAX_ITER,
) -> QueueDistribution:
    """Entropy-maximizing distribution on 0..capacity under the constraints.

    Newton on the dual of the entropy program; converged means every
    constraint residual is below tol.  Boundary or contradictory targets
    raise MeInfeasibleError; a stalled iteration raises MeConvergenceError
    with the worst residual.
    """
    N = int(capacity)
    if N < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    k = np.arange(N + 1, dtype=float)

    busy = constraints.total_utilization
    mean = constraints.total_mean
    full = constraints.full_buffer_prob
    _check_feasible(busy, mean, full, N)

    feats, targets = [], []
    if busy is not None:
        feats.append((k >= 1).astype(float))
        targets.append(busy)
    if mean is not None:
        feats.append(k.copy())
        targets.append(mean)
    if full is not None:
        feats.append((k == N).astype(float))
        targets.append(full)

    if not feats:
        return QueueDistribution(mass=np.full(N + 1, 1.0 / (N + 1)))

    F = np.column_stack(feats)  # (N+1, m)
    t = np.array(targets)
    m = len(targets)
    theta = np.zeros(m)

    def dual_and_dist(th):
        w = F @ th
        mx = w.max()
        e = np.exp(w - mx)
        z = e.sum()
        g = np.log(z) + mx - th @ t  # logsumexp minus the linear term
        return g, e / z

    obj, p = dual_and_dist(theta)
    for _ in range(max_iter):
        moments = F.T @ p
        resid = moments - t
        if np.abs(resid).max() < tol:
            return QueueDistribution(mass=p)
        cov = F.T @ (F * p[:, None]) - np.outer(moments, moments)
        try:
            step = np.linalg.solve(cov + 1e-14 * np.eye(m), -resid)
        except np.linalg.LinAlgError:
            step = -resid
        # backtracking on the convex dual
        alpha = 1.0
        for _ in range(60):
            cand = theta + alpha * step
            cand_obj, cand_p = dual_and_dist(cand)
            if cand_obj <= obj + 1e-15:
                theta, obj, p = cand, cand_obj, cand_p
                break
            alpha *= 0.5
        else:
            raise MeConvergenceError(
                f"dual line search stalled; max residual {np.abs(resid).max():.3e}"
            )
        if np.abs(theta).max() > _THETA_LIMIT:
            raise MeInfeasibleError(
                "dual coefficients diverging - constraints lie on or outside the "
                f"feasible boundary (max residual {np.abs(resid).max():.3e})"
            )
    moments = F.T @ p
    resid = np.abs(moments - t).max()
    if resid < tol:
        return QueueDistribution(mass=p)
    raise MeConvergenceError(
        f"no convergence after {max_iter} iterations; max residual {resid:.3e}"
    )
