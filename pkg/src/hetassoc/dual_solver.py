"""
Distributed primal-dual association via Lagrangian dual decomposition.

Each BS ``j`` publishes a price ``mu_j``. Users best-respond by picking
``argmax_j ln c_ij - mu_j``; each BS sets its supply
``K_j = min(N_U, exp(mu_j - 1))`` and moves its price against the excess
supply ``K_j - demand_j``. The stepsize follows a target-level rule whose
target sits ``eps(t)`` below the best dual value seen so far.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .association import Association
from .fua_solver import fua_objective
from .topology import LinkTable

MU_FLOOR = 1.0 + math.log(1e-6)


@dataclass(frozen=True)
class StepsizeParams:
    """Constants of the dynamic stepsize rule.

    ``eps_init`` and ``eps_min`` left as None are filled by ``resolve``:
    ``eps_init = max(1, 0.1 |D(mu(0))|)`` and ``eps_min = 1e-3 N_U``.
    """

    gamma: float = 1.0
    eps_init: float | None = None
    eps_min: float | None = None
    beta: float = 0.5
    rho: float = 1.5

    def __post_init__(self):
        if not 0 < self.gamma < 2:
            raise ValueError("gamma must lie in (0, 2)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if self.eps_min is not None and self.eps_min <= 0:
            raise ValueError("eps_min must be positive")
        if (self.eps_min is not None and self.eps_init is not None
                and self.eps_init < self.eps_min):
            raise ValueError("eps_init must be at least eps_min")

    def resolve(self, n_users: int, d0: float) -> "StepsizeParams":
        eps_min = 1e-3 * n_users if self.eps_min is None else self.eps_min
        eps_init = max(1.0, 0.1 * abs(d0)) if self.eps_init is None else self.eps_init
        return replace(self, eps_init=max(eps_init, eps_min), eps_min=eps_min)


@dataclass
class DualState:
    mu: np.ndarray
    supply: np.ndarray
    demand: np.ndarray
    t: int
    eps: float
    best_dual: float
    best_mu: np.ndarray | None = None


@dataclass
class DualTrace:
    dual_value: list[float] = field(default_factory=list)
    stepsize: list[float] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)
    max_imbalance: list[float] = field(default_factory=list)
    primal_utility: list[float] = field(default_factory=list)
    mu: list[np.ndarray] = field(default_factory=list)
    supply: list[np.ndarray] = field(default_factory=list)
    demand: list[np.ndarray] = field(default_factory=list)
    broadcasts: list[int] = field(default_factory=list)
    requests: list[int] = field(default_factory=list)
    floored: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.dual_value)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iter", "dual_value", "stepsize", "epsilon", "max_imbalance",
                        "primal_utility"])
            for t in range(len(self)):
                w.writerow([t, repr(self.dual_value[t]), repr(self.stepsize[t]),
                            repr(self.epsilon[t]), repr(self.max_imbalance[t]),
                            repr(self.primal_utility[t])])


@dataclass(eq=False)
class DualResult:
    assoc: Association
    state: DualState
    trace: DualTrace
    params: StepsizeParams
    converged: bool
    stop_reason: str  # "balanced", "zero_gradient", "plateau" or "max_iter"
    balanced_at: int | None
    unbalanced_bs: np.ndarray
    bound_ok: bool | None = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def best_dual(self) -> float:
        return self.state.best_dual

    def __iter__(self):
        return iter((self.assoc, self.state, self.trace))


def user_step(links: LinkTable, mu) -> Association:
    """Each user picks ``argmax_j ln c_ij - mu_j`` (lowest index on ties)."""
    scores = links.log_rate - np.asarray(mu, dtype=float)[None, :]
    return Association.from_choice(np.argmax(scores, axis=1), links.n_bs)


def bs_supply_step(mu_j, n_users: int):
    return np.minimum(float(n_users), np.exp(np.asarray(mu_j, dtype=float) - 1.0))


def bs_price_step(mu_j, delta: float, k_j, demand_j):
    """Raise the price when demand exceeds supply, lower it otherwise."""
    return mu_j - delta * (k_j - demand_j)


def dual_objective(links: LinkTable, mu, n_users: int | None = None) -> float:
    """``D(mu) = f(mu) + g(mu)``, both inner maximisations solved in closed form."""
    mu = np.asarray(mu, dtype=float)
    n_users = links.n_users if n_users is None else n_users
    f = float(np.sum(np.max(links.log_rate - mu[None, :], axis=1)))
    k = bs_supply_step(mu, n_users)
    g = float(np.sum(k * (mu - np.log(k))))
    return f + g


def dual_subgradient(links: LinkTable, mu, n_users: int | None = None) -> np.ndarray:
    n_users = links.n_users if n_users is None else n_users
    demand = user_step(links, mu).x.sum(axis=0)
    return bs_supply_step(mu, n_users) - demand


def dynamic_stepsize(state: DualState, params: StepsizeParams, grad_norm_sq: float,
                     d_now: float) -> float:
    """Target-level stepsize; returns 0.0 when the subgradient vanishes (optimum)."""
    if grad_norm_sq <= 0:
        return 0.0
    target = min(state.best_dual, d_now) - state.eps
    return params.gamma * (d_now - target) / grad_norm_sq


def epsilon_update(eps: float, improved: bool, params: StepsizeParams) -> float:
    if improved:
        return params.rho * eps
    return max(params.beta * eps, params.eps_min)


def initial_mu(n_users: int, n_bs: int) -> np.ndarray:
    """Prices whose supplies split the users evenly over the BSs."""
    return np.full(n_bs, 1.0 + math.log(n_users / n_bs))


def run_dual(links: LinkTable, params: StepsizeParams | None = None, max_iter: int = 500,
             tol_balance: float | None = 0.5, plateau_window: int = 20,
             d_ref: float | None = None, mu0=None, eps_rule: str = "target") -> DualResult:
    """Run synchronous rounds of the user and BS algorithms.

    Stops when every BS has ``|K_j - demand_j| <= tol_balance``, when the
    subgradient is exactly zero, when the best dual value has not improved
    by more than ``eps_min`` for ``plateau_window`` rounds, or after
    ``max_iter`` price updates. ``tol_balance=None`` disables the balance
    stop so the run continues until the dual value settles.

    ``eps_rule`` decides when ``eps`` grows: ``"target"`` when the new dual
    value reaches the previous target level, ``"consecutive"`` when it does
    not exceed the previous dual value.

    If ``d_ref`` (the centralised optimum) is given, ``bound_ok`` records
    whether ``min_t D(mu(t)) <= d_ref + eps_min + 1e-6 N_U``.
    """
    if eps_rule not in ("target", "consecutive"):
        raise ValueError(f"unknown eps_rule {eps_rule!r}")
    params = StepsizeParams() if params is None else params
    n_u, n_b = links.shape
    mu = initial_mu(n_u, n_b) if mu0 is None else np.array(mu0, dtype=float)
    trace = DualTrace()
    state = None
    d_prev = target = None
    ref, last_improve = math.inf, 0
    stop = "max_iter"
    balanced_at = None

    t = 0
    while True:
        x = user_step(links, mu)
        demand = x.x.sum(axis=0)
        supply = bs_supply_step(mu, n_u)
        d_now = dual_objective(links, mu, n_u)
        if state is None:
            params = params.resolve(n_u, d_now)
            state = DualState(mu=mu, supply=supply, demand=demand, t=0,
                              eps=params.eps_init, best_dual=d_now, best_mu=mu)
        else:
            improved = d_now <= (target if eps_rule == "target" else d_prev)
            state.eps = epsilon_update(state.eps, improved, params)
        grad = supply - demand
        imbalance = float(np.max(np.abs(grad)))

        trace.dual_value.append(d_now)
        trace.epsilon.append(state.eps)
        trace.max_imbalance.append(imbalance)
        trace.primal_utility.append(fua_objective(x, links))
        trace.mu.append(mu.copy())
        trace.supply.append(supply)
        trace.demand.append(demand)
        trace.broadcasts.append(mu.size)
        trace.requests.append(int(x.x.sum()))
        trace.floored.append(int(np.sum(mu <= MU_FLOOR)))

        state.mu, state.supply, state.demand, state.t = mu, supply, demand, t
        if d_now < ref - params.eps_min:
            ref, last_improve = d_now, t
        grad_sq = float(grad @ grad)
        delta = dynamic_stepsize(state, params, grad_sq, d_now)
        if d_now <= state.best_dual:
            state.best_dual, state.best_mu = d_now, mu
        target = state.best_dual - state.eps
        d_prev = d_now

        if tol_balance is not None and imbalance <= tol_balance:
            stop, balanced_at = "balanced", t
        elif grad_sq == 0.0:
            stop = "zero_gradient"
        elif t - last_improve >= plateau_window:
            stop = "plateau"
        elif t >= max_iter:
            stop = "max_iter"
        else:
            stop = None
        if stop is not None:
            trace.stepsize.append(0.0)
            break

        trace.stepsize.append(delta)
        mu = np.maximum(bs_price_step(mu, delta, supply, demand), MU_FLOOR)
        t += 1

    tb = 0.5 if tol_balance is None else tol_balance
    unbalanced = np.flatnonzero(np.abs(state.supply - state.demand) > tb)
    bound_ok = None
    if d_ref is not None:
        bound_ok = bool(state.best_dual <= d_ref + params.eps_min + 1e-6 * n_u)
    return DualResult(assoc=x, state=state, trace=trace, params=params,
                      converged=stop != "max_iter", stop_reason=stop,
                      balanced_at=balanced_at, unbalanced_bs=unbalanced,
                      bound_ok=bound_ok)
