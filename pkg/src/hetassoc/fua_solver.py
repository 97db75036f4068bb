"""
Centralised solver for the fractional user association (FUA) relaxation and
the brute-force integer oracle for small networks.

The relaxed objective is written in its load form

    U(x) = sum_ij x_ij ln c_ij - sum_j K_j ln K_j,   K_j = sum_i x_ij,

with ``0 ln 0 = 0``. It is concave over the product of per-user simplices and
is maximised by conditional gradient.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .association import Association, max_sinr_assoc
from .topology import LinkTable

EMPTY_LOAD = 1e-12
DEFAULT_MAX_ITER = 5000


class TooLargeError(ValueError):
    """Brute-force enumeration would exceed the configured cap."""


def xlogx(k):
    k = np.asarray(k, dtype=float)
    return np.where(k > 0, k * np.log(np.where(k > 0, k, 1.0)), 0.0)


def fua_objective(x, links: LinkTable) -> float:
    """Relaxed utility of a (possibly fractional) association table."""
    x = x.x if isinstance(x, Association) else np.asarray(x)
    return float(np.sum(x * links.log_rate) - np.sum(xlogx(x.sum(axis=0))))


def fua_gradient(x, links: LinkTable) -> np.ndarray:
    """``ln c_ij - ln K_j - 1``; loads below EMPTY_LOAD are clamped."""
    x = x.x if isinstance(x, Association) else np.asarray(x)
    k = np.maximum(x.sum(axis=0), EMPTY_LOAD)
    return links.log_rate - np.log(k)[None, :] - 1.0


def fw_linear_oracle(gradient) -> Association:
    """Vertex of the product of simplices maximising ``<gradient, s>``."""
    g = np.asarray(gradient, dtype=float)
    return Association.from_choice(np.argmax(g, axis=1), g.shape[1])


def fw_gap(x: np.ndarray, grad: np.ndarray) -> float:
    return float(np.sum(grad.max(axis=1)) - np.sum(grad * x))


@dataclass(eq=False)
class FuaSolution:
    assoc: Association
    utility: float
    gap: float
    iterations: int
    converged: bool
    trace: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def x(self) -> np.ndarray:
        return self.assoc.x

    def trace_to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iter", "utility", "fw_gap"])
            for it, u, g in self.trace:
                w.writerow([it, repr(u), repr(g)])


def _line_search(x, d, links: LinkTable) -> float:
    """Exact maximiser over [0, 1] of U(x + t d), via the root of its derivative."""
    k = x.sum(axis=0)
    dk = d.sum(axis=0)
    slope0 = float(np.sum(d * links.log_rate))
    moving = dk != 0
    k, dk = k[moving], dk[moving]

    def deriv(t):
        kt = k + t * dk
        with np.errstate(divide="ignore"):
            logk = np.log(np.maximum(kt, 0.0))
        return slope0 - float(np.sum(dk * logk))

    hi = deriv(1.0)
    if hi >= 0:
        return 1.0
    lo_t = 0.0
    lo = deriv(lo_t)
    if not np.isfinite(lo):
        lo_t = 1e-15
        lo = deriv(lo_t)
    if lo <= 0:
        return 0.0
    if not np.isfinite(hi):
        # the derivative is -inf at t = 1 only because some load empties there
        hi_t = 1.0 - 1e-15
    else:
        hi_t = 1.0
    return brentq(deriv, lo_t, hi_t, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _pairwise_sweep(x: np.ndarray, k: np.ndarray, logc: np.ndarray, users) -> None:
    """In-place block-coordinate pairwise steps, one user at a time.

    Each user moves mass from its worst active BS to its oracle BS; the step
    maximising the objective along that pair has a closed form.
    """
    for i in users:
        g = logc[i] - np.log(np.maximum(k, EMPTY_LOAD))
        s = int(np.argmax(g))
        active = x[i] > 0
        ga = np.where(active, g, np.inf)
        v = int(np.argmin(ga))
        if s == v or g[s] <= g[v]:
            continue
        ea = np.exp(logc[i, s] - logc[i, v])
        t = (ea * k[v] - k[s]) / (1.0 + ea)
        t = min(max(t, 0.0), x[i, v])
        if t <= 0.0:
            continue
        if t >= x[i, v]:
            t = x[i, v]
            x[i, v] = 0.0
        else:
            x[i, v] -= t
        x[i, s] += t
        k[s] += t
        k[v] = max(k[v] - t, 0.0)


def solve_fua(links: LinkTable, tol: float | None = None, max_iter: int = DEFAULT_MAX_ITER,
              x0: Association | None = None, method: str = "pairwise",
              record_trace: bool = True) -> FuaSolution:
    """Maximise the relaxed utility by conditional gradient.

    Parameters
    ----------
    links : LinkTable
    tol : float, optional
        Stop once the Frank-Wolfe gap is at most ``tol``. Defaults to
        ``1e-6 * N_U``.
    max_iter : int
        Iteration cap. A ``pairwise`` iteration is one pass over every user
        whose pairwise gap is positive; a ``vanilla`` iteration is one
        full Frank-Wolfe step.
    x0 : Association, optional
        Starting point; defaults to the max-SINR association.
    method : {"pairwise", "vanilla"}
        ``vanilla`` moves all users toward the oracle vertex with one common
        exact line search. ``pairwise`` applies per-user pairwise steps
        (oracle BS against the worst active BS), each with its own exact step.

    Returns
    -------
    FuaSolution
        ``gap`` is the Frank-Wolfe gap at the returned point, which bounds
        the suboptimality from above.
    """
    n_u = links.n_users
    if tol is None:
        tol = 1e-6 * n_u
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method not in ("pairwise", "vanilla"):
        raise ValueError(f"unknown method {method!r}")
    x = (max_sinr_assoc(links) if x0 is None else x0).x.astype(float).copy()
    logc = links.log_rate
    trace = []
    converged = False
    it = 0
    while True:
        grad = fua_gradient(x, links)
        gap = fw_gap(x, grad)
        if record_trace:
            trace.append((it, fua_objective(x, links), gap))
        if gap <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        if method == "vanilla":
            s = fw_linear_oracle(grad).x
            d = s - x
            step = _line_search(x, d, links)
            if step <= 0.0:
                # no ascent along the FW direction at machine precision
                break
            x = x + step * d
            np.clip(x, 0.0, 1.0, out=x)
        else:
            active_min = np.where(x > 0, grad, np.inf).min(axis=1)
            pair_gap = grad.max(axis=1) - active_min
            users = np.flatnonzero(pair_gap > 0.1 * tol / n_u)
            k = x.sum(axis=0)
            _pairwise_sweep(x, k, logc, users)
        # guard against drift of the row sums
        x /= x.sum(axis=1, keepdims=True)

    assoc = Association(x, integer=bool(np.all((x == 0) | (x == 1))))
    return FuaSolution(assoc=assoc, utility=fua_objective(x, links), gap=max(gap, 0.0),
                       iterations=it, converged=converged, trace=trace)


@dataclass(eq=False)
class BruteForceSolution:
    assoc: Association
    utility: float
    n_enumerated: int


def brute_force_optimal(links: LinkTable, cap: int = 10**7, chunk: int = 2**16) -> BruteForceSolution:
    """Exact integer optimum by enumerating all ``N_B ** N_U`` assignments.

    Assignments are visited in lexicographic order (user 0 most significant)
    and the first maximiser is kept.
    """
    n_u, n_b = links.shape
    total = n_b ** n_u
    if total > cap:
        raise TooLargeError(f"{n_b}^{n_u} = {total} assignments exceeds cap {cap}")
    logc = links.log_rate
    weights = n_b ** np.arange(n_u - 1, -1, -1, dtype=np.int64)
    users = np.arange(n_u)
    best_u, best_idx = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // weights[None, :]) % n_b
        u = logc[users[None, :], digits].sum(axis=1)
        counts = np.stack([(digits == j).sum(axis=1) for j in range(n_b)], axis=1)
        u = u - xlogx(counts).sum(axis=1)
        m = int(np.argmax(u))
        if u[m] > best_u:
            best_u, best_idx = float(u[m]), int(idx[m])
    choice = (best_idx // weights) % n_b
    return BruteForceSolution(Association.from_choice(choice, n_b), best_u, total)


@dataclass(frozen=True)
class GapReport:
    utility_gap: float
    rate_ratio: float


def fua_gap_report(sol: FuaSolution, integer: Association, links: LinkTable) -> GapReport:
    """Utility lost by an integer association relative to the FUA solution.

    ``rate_ratio`` is the per-user geometric-mean rate ratio.
    """
    gap = sol.utility - fua_objective(integer, links)
    return GapReport(utility_gap=gap, rate_ratio=float(np.exp(gap / links.n_users)))
