"""Association tables, loads, long-term rates and the closed-form association rules."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .topology import LinkTable, db2lin

ROW_TOL = 1e-9


class InvalidBiasError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Association:
    """Row-stochastic user-to-BS table ``x[i, j]``.

    ``integer`` marks 0/1 tables (exactly one 1 per row).
    """

    x: np.ndarray
    integer: bool = False

    def __post_init__(self):
        x = self.x
        if x.ndim != 2:
            raise ValueError("association table must be 2-D")
        if np.any(x < -ROW_TOL) or np.any(x > 1 + ROW_TOL):
            raise ValueError("association weights must lie in [0, 1]")
        if not np.allclose(x.sum(axis=1), 1.0, rtol=0.0, atol=ROW_TOL * max(1, x.shape[1])):
            raise ValueError("association rows must sum to 1")
        if self.integer and not (np.all((x == 0) | (x == 1)) and np.all(x.sum(axis=1) == 1)):
            raise ValueError("integer association must have one 1 per row")

    @classmethod
    def from_choice(cls, choice, n_bs: int) -> "Association":
        choice = np.asarray(choice, dtype=int)
        x = np.zeros((choice.size, n_bs))
        x[np.arange(choice.size), choice] = 1.0
        return cls(x, integer=True)

    @property
    def choice(self) -> np.ndarray:
        """Serving BS index per user (argmax of each row, lowest index on ties)."""
        return np.argmax(self.x, axis=1)

    @property
    def n_users(self) -> int:
        return self.x.shape[0]

    @property
    def n_bs(self) -> int:
        return self.x.shape[1]

    def to_csv(self, path, user_ids=None, bs_ids=None) -> None:
        uid = np.arange(self.n_users) if user_ids is None else user_ids
        bid = np.arange(self.n_bs) if bs_ids is None else bs_ids
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["user_id", "bs_id", "weight"])
            for i, j in zip(*np.nonzero(self.x)):
                w.writerow([int(uid[i]), int(bid[j]), repr(float(self.x[i, j]))])

    @classmethod
    def from_csv(cls, path, n_users: int, n_bs: int) -> "Association":
        x = np.zeros((n_users, n_bs))
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                x[int(row["user_id"]), int(row["bs_id"])] = float(row["weight"])
        integer = bool(np.all((x == 0) | (x == 1)))
        return cls(x, integer=integer)


@dataclass(frozen=True)
class BiasConfig:
    """Per-tier SINR factors ``sinr`` (A) and rate factors ``rate`` (B), linear units."""

    sinr: tuple[float, ...]
    rate: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("sinr", "rate"):
            v = getattr(self, name)
            if v is not None and any(not (a > 0 and np.isfinite(a)) for a in v):
                raise InvalidBiasError(f"{name} bias factors must be positive and finite")

    @classmethod
    def ones(cls, n_tiers: int) -> "BiasConfig":
        return cls((1.0,) * n_tiers, (1.0,) * n_tiers)

    def normalized(self) -> "BiasConfig":
        """Rescale both factor sets so tier 1 (macro) is exactly 1."""
        sinr = tuple(a / self.sinr[0] for a in self.sinr)
        rate = None if self.rate is None else tuple(b / self.rate[0] for b in self.rate)
        return BiasConfig(sinr, rate)

    @property
    def sinr_db(self) -> tuple[float, ...]:
        return tuple(float(10 * np.log10(a)) for a in self.sinr)


def parse_factor(value) -> float:
    """Linear factor from a number or a string with an explicit ``dB`` suffix."""
    if isinstance(value, str):
        v = value.strip()
        if v.lower().endswith("db"):
            return float(db2lin(float(v[:-2])))
        return float(v)
    return float(value)


def _check_factors(factors, n_tiers: int) -> np.ndarray:
    f = np.asarray(factors, dtype=float)
    if f.shape != (n_tiers,):
        raise InvalidBiasError(f"expected {n_tiers} per-tier factors, got {f.shape}")
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise InvalidBiasError("bias factors must be positive and finite")
    return f


def _n_tiers(links: LinkTable) -> int:
    return int(links.bs_tier.max()) + 1


def max_sinr_assoc(links: LinkTable) -> Association:
    return Association.from_choice(np.argmax(links.sinr, axis=1), links.n_bs)


def biased_sinr_assoc(links: LinkTable, bias) -> Association:
    """Max biased-SINR association; ``bias`` is a BiasConfig or per-tier factors."""
    factors = bias.sinr if isinstance(bias, BiasConfig) else bias
    a = _check_factors(factors, max(len(factors), _n_tiers(links)))
    return Association.from_choice(np.argmax(links.sinr * a[links.bs_tier], axis=1), links.n_bs)


def biased_rate_assoc(links: LinkTable, bias) -> Association:
    factors = bias.rate if isinstance(bias, BiasConfig) else bias
    if factors is None:
        raise InvalidBiasError("no rate bias factors configured")
    b = _check_factors(factors, max(len(factors), _n_tiers(links)))
    return Association.from_choice(np.argmax(links.rate * b[links.bs_tier], axis=1), links.n_bs)


def loads(assoc: Association) -> np.ndarray:
    return assoc.x.sum(axis=0)


@dataclass(frozen=True, eq=False)
class RateOutcome:
    rates: np.ndarray
    utility: float


def long_term_rates(assoc: Association, links: LinkTable) -> RateOutcome:
    """Per-user rate under equal resource sharing at each BS.

    ``R_i = sum_j x_ij * c_ij / K_j``; for 0/1 tables this is ``c_ij / K_j``
    at the serving BS. Utility is ``sum_i ln R_i``.
    """
    k = loads(assoc)
    share = np.divide(assoc.x, k[None, :], out=np.zeros_like(assoc.x), where=k[None, :] > 0)
    rates = (share * links.rate).sum(axis=1)
    return RateOutcome(rates=rates, utility=float(np.sum(np.log(rates))))


def utility(assoc: Association, links: LinkTable) -> float:
    return long_term_rates(assoc, links).utility


def round_fractional(x: Association, links: LinkTable | None = None,
                     improve: bool = False) -> Association:
    """Send every user to its largest-weight BS (lowest index on ties).

    With ``improve=True`` (requires ``links``) the rounded table is then
    refined by ``local_search``.
    """
    out = x if x.integer else Association.from_choice(x.choice, x.n_bs)
    if improve:
        if links is None:
            raise ValueError("improve=True needs the link table")
        out = local_search(out, links)
    return out


def _xlogx(k):
    return np.where(k > 0, k * np.log(np.where(k > 0, k, 1.0)), 0.0)


def local_search(assoc: Association, links: LinkTable, max_moves: int = 100_000) -> Association:
    """Greedy single-user moves, best improvement first, until none helps."""
    choice = assoc.choice.copy()
    logc = links.log_rate
    n_u, n_b = logc.shape
    rows = np.arange(n_u)
    k = np.bincount(choice, minlength=n_b).astype(float)
    for _ in range(max_moves):
        join = _xlogx(k + 1) - _xlogx(k)  # cost of one more user at each BS
        leave = _xlogx(k) - _xlogx(k - 1)  # saving when one user leaves
        own = choice
        delta = (logc - logc[rows, own][:, None]) - join[None, :] + leave[own][:, None]
        delta[rows, own] = 0.0
        i, j = np.unravel_index(int(np.argmax(delta)), delta.shape)
        if delta[i, j] <= 1e-12:
            break
        k[choice[i]] -= 1
        k[j] += 1
        choice[i] = j
    return Association.from_choice(choice, n_b)


def tier_loads(assoc_loads: np.ndarray, bs_tier: np.ndarray, n_tiers: int | None = None) -> np.ndarray:
    """Total load carried by each tier."""
    n = int(bs_tier.max()) + 1 if n_tiers is None else n_tiers
    return np.bincount(bs_tier, weights=assoc_loads, minlength=n)
