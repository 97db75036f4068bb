"""
Multi-BS joint association bound.

Each BS splits a unit resource budget over all users, ``sum_i y_ij <= 1``,
and user ``i`` collects ``R_i = sum_j y_ij c_ij``. Maximising
``sum_i ln R_i`` over this product of capped simplices upper-bounds every
single-association scheme.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .association import Association, max_sinr_assoc
from .fua_solver import DEFAULT_MAX_ITER, FuaSolution
from .topology import LinkTable

REPAIR_EPS = 1e-6


class InvariantViolation(AssertionError):
    pass


@dataclass(eq=False)
class JointSolution:
    y: np.ndarray
    rates: np.ndarray
    utility: float
    gap: float
    iterations: int
    converged: bool
    trace: list[tuple[int, float, float]] = field(default_factory=list)

    def to_csv(self, path, user_ids=None, bs_ids=None) -> None:
        n_u, n_b = self.y.shape
        uid = np.arange(n_u) if user_ids is None else user_ids
        bid = np.arange(n_b) if bs_ids is None else bs_ids
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["user_id", "bs_id", "y", "user_rate"])
            for i, j in zip(*np.nonzero(self.y)):
                w.writerow([int(uid[i]), int(bid[j]), repr(float(self.y[i, j])),
                            repr(float(self.rates[i]))])

    def association_mass(self, links: LinkTable) -> np.ndarray:
        """Fraction of each user's rate delivered by each BS (rows sum to 1)."""
        return self.y * links.rate / self.rates[:, None]


def joint_objective(y, links: LinkTable) -> float:
    return float(np.sum(np.log((np.asarray(y) * links.rate).sum(axis=1))))


def joint_gradient(y, links: LinkTable) -> np.ndarray:
    r = (np.asarray(y) * links.rate).sum(axis=1)
    return links.rate / r[:, None]


def joint_fw_gap(y: np.ndarray, grad: np.ndarray) -> float:
    # best vertex per BS spends the whole budget on one user (gradients are positive)
    return float(np.sum(np.maximum(grad.max(axis=0), 0.0)) - np.sum(grad * y))


def joint_from_fua(x) -> np.ndarray:
    """Equal-share allocation ``y_ij = x_ij / K_j`` induced by an association."""
    x = x.x if isinstance(x, Association) else np.asarray(x)
    k = x.sum(axis=0)
    return np.divide(x, k[None, :], out=np.zeros_like(x), where=k[None, :] > 0)


def _repair(y: np.ndarray, links: LinkTable) -> np.ndarray:
    r = (y * links.rate).sum(axis=1)
    if np.all(r > 0):
        return y
    y = y.copy()
    y[r <= 0, :] += REPAIR_EPS
    col = y.sum(axis=0)
    over = col > 1.0
    y[:, over] /= col[over]
    return y


def _line_search(y, d, links: LinkTable) -> float:
    r = (y * links.rate).sum(axis=1)
    dr = (d * links.rate).sum(axis=1)

    def deriv(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.sum(dr / (r + t * dr)))

    if deriv(1.0) >= 0:
        return 1.0
    if deriv(0.0) <= 0:
        return 0.0
    hi = 1.0
    if not np.isfinite(deriv(hi)):
        hi = 1.0 - 1e-15
    return brentq(deriv, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _pairwise_sweep(y: np.ndarray, r: np.ndarray, c: np.ndarray) -> None:
    """Per-BS pairwise steps: unused budget first, then worst user to best user."""
    n_b = c.shape[1]
    for j in range(n_b):
        cj = c[:, j]
        slack = 1.0 - y[:, j].sum()
        g = cj / r
        s = int(np.argmax(g))
        if slack > 0:
            y[s, j] += slack
            r[s] += slack * cj[s]
            g = cj / r
            s = int(np.argmax(g))
        active = y[:, j] > 0
        v = int(np.argmin(np.where(active, g, np.inf)))
        if s == v or g[s] <= g[v]:
            continue
        t = (cj[s] * r[v] - cj[v] * r[s]) / (2.0 * cj[s] * cj[v])
        t = min(max(t, 0.0), y[v, j])
        if t <= 0.0:
            continue
        if t >= y[v, j]:
            t = y[v, j]
            y[v, j] = 0.0
        else:
            y[v, j] -= t
        y[s, j] += t
        r[s] += t * cj[s]
        r[v] = max(r[v] - t * cj[v], 0.0)


def solve_joint(links: LinkTable, tol: float | None = None, max_iter: int = DEFAULT_MAX_ITER,
                y0=None, method: str = "pairwise", record_trace: bool = True) -> JointSolution:
    """Conditional-gradient ascent on the joint-association utility.

    ``y0`` defaults to the max-SINR association (one full share per user at
    its strongest BS); ``tol`` defaults to ``1e-6 * N_U``. See
    ``solve_fua`` for the meaning of ``method`` and ``max_iter``.
    """
    n_u = links.n_users
    if tol is None:
        tol = 1e-6 * n_u
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method not in ("pairwise", "vanilla"):
        raise ValueError(f"unknown method {method!r}")
    if y0 is None:
        y = joint_from_fua(max_sinr_assoc(links))
    else:
        y = np.array(y0.x if isinstance(y0, Association) else y0, dtype=float)
    y = _repair(y, links)
    c = links.rate
    trace = []
    converged = False
    it = 0
    while True:
        grad = joint_gradient(y, links)
        gap = joint_fw_gap(y, grad)
        if record_trace:
            trace.append((it, joint_objective(y, links), gap))
        if gap <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        if method == "vanilla":
            s = np.zeros_like(y)
            s[np.argmax(grad, axis=0), np.arange(links.n_bs)] = 1.0
            d = s - y
            step = _line_search(y, d, links)
            if step <= 0.0:
                break
            y = np.clip(y + step * d, 0.0, 1.0)
        else:
            r = (y * c).sum(axis=1)
            _pairwise_sweep(y, r, c)

    rates = (y * c).sum(axis=1)
    return JointSolution(y=y, rates=rates, utility=float(np.sum(np.log(rates))),
                         gap=max(gap, 0.0), iterations=it, converged=converged, trace=trace)


@dataclass(frozen=True)
class BoundReport:
    utility_gap: float
    rate_ratio: float


def joint_dominates(joint: JointSolution, fua: FuaSolution, slack: float = 1e-6) -> BoundReport:
    """Check that the joint bound sits above the FUA optimum and report the gap."""
    gap = joint.utility - fua.utility
    if gap < -slack:
        raise InvariantViolation(
            f"joint utility {joint.utility} below FUA utility {fua.utility} by {-gap}")
    return BoundReport(utility_gap=gap, rate_ratio=float(np.exp(gap / joint.y.shape[0])))
