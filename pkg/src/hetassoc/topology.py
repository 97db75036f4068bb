"""
Multi-tier network scenarios and the channel tables the solvers consume.

Macro sites sit on a hexagonal lattice; the simulation region is the
fundamental parallelogram of a hexagonal super-lattice, so with ``wrap``
enabled the layout tiles the plane and distances use the minimum image.
Small cells and users are dropped uniformly over the same region.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np


class InvalidConfigError(ValueError):
    """Raised for scenario configurations that cannot produce a network."""


# (i, j) shift parameters of the hexagonal super-lattice, N = i^2 + ij + j^2
_HEX_CLUSTERS = {1: (1, 0), 3: (1, 1), 4: (2, 0), 7: (2, 1), 9: (3, 0),
                 12: (2, 2), 13: (3, 1), 16: (4, 0), 19: (3, 2), 21: (4, 1)}


def db2lin(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def lin2db(lin):
    return 10.0 * np.log10(lin)


@dataclass(frozen=True)
class ChannelParams:
    """Per-tier path-loss model plus shadowing and thermal noise.

    ``intercept_db[k]`` and ``slope_db[k]`` parameterise tier ``k`` as
    ``intercept + slope * log10(d)`` with ``d`` in meters.
    """

    intercept_db: tuple[float, ...]
    slope_db: tuple[float, ...]
    shadowing_db: float = 8.0
    noise_dbm: float = -104.0
    bandwidth_hz: float = 10e6
    d_min_m: float = 1.0

    def __post_init__(self):
        if len(self.intercept_db) != len(self.slope_db):
            raise InvalidConfigError("intercept_db and slope_db differ in length")
        if any(s <= 0 for s in self.slope_db):
            raise InvalidConfigError("path-loss slopes must be positive")
        if self.shadowing_db < 0:
            raise InvalidConfigError("shadowing standard deviation must be >= 0")
        if not np.isfinite(self.noise_dbm):
            raise InvalidConfigError("noise power must be finite")
        if self.d_min_m <= 0:
            raise InvalidConfigError("d_min_m must be positive")

    @property
    def n_tiers(self) -> int:
        return len(self.slope_db)

    @property
    def noise_mw(self) -> float:
        return float(db2lin(self.noise_dbm))


@dataclass(frozen=True)
class BaseStation:
    id: int
    tier: int  # 0-based; tier 0 is the macro tier
    position: tuple[float, float]
    power_dbm: float


@dataclass(frozen=True)
class User:
    id: int
    position: tuple[float, float]


@dataclass(frozen=True)
class TierConfig:
    name: str
    power_dbm: float
    pathloss_intercept_db: float
    pathloss_slope_db: float
    count_per_macro: float | None = None
    density: float | None = None  # Poisson mean per macrocell


@dataclass(frozen=True)
class MacroLayout:
    n_macro: int = 7
    isd_m: float = 500.0
    wrap: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    tiers: tuple[TierConfig, ...]
    macro_layout: MacroLayout = MacroLayout()
    n_users: int = 210
    shadowing_db: float = 8.0
    noise_dbm: float = -104.0
    bandwidth_hz: float = 10e6
    d_min_m: float = 1.0
    seed: int = 0

    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            intercept_db=tuple(t.pathloss_intercept_db for t in self.tiers),
            slope_db=tuple(t.pathloss_slope_db for t in self.tiers),
            shadowing_db=self.shadowing_db,
            noise_dbm=self.noise_dbm,
            bandwidth_hz=self.bandwidth_hz,
            d_min_m=self.d_min_m,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tiers"] = [asdict(t) for t in self.tiers]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        try:
            tiers = tuple(TierConfig(**t) for t in d.pop("tiers"))
        except (KeyError, TypeError) as e:
            raise InvalidConfigError(f"bad tier list: {e}") from e
        layout = MacroLayout(**d.pop("macro_layout", {}))
        try:
            return cls(tiers=tiers, macro_layout=layout, **d)
        except TypeError as e:
            raise InvalidConfigError(str(e)) from e

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def replace_tier(self, index: int, **changes) -> "ScenarioConfig":
        tiers = list(self.tiers)
        tiers[index] = replace(tiers[index], **changes)
        return replace(self, tiers=tuple(tiers))


def three_tier_config(n_macro: int = 7, users_per_macro: int = 30, isd_m: float = 500.0,
                 seed: int = 0) -> ScenarioConfig:
    """Default three-tier macro/pico/femto network (46/35/20 dBm, 5 picos and 20 femtos per macro)."""
    tiers = (
        TierConfig("macro", 46.0, 34.0, 40.0),
        TierConfig("pico", 35.0, 34.0, 40.0, count_per_macro=5),
        TierConfig("femto", 20.0, 37.0, 30.0, count_per_macro=20),
    )
    return ScenarioConfig(
        tiers=tiers,
        macro_layout=MacroLayout(n_macro=n_macro, isd_m=isd_m, wrap=True),
        n_users=users_per_macro * n_macro,
        seed=seed,
    )


@dataclass(frozen=True, eq=False)
class Scenario:
    """The simulation world.

    ``region`` holds the two basis vectors (rows) of the parallelogram
    centred on the origin; points are ``s * region[0] + t * region[1]`` with
    ``s, t`` in ``[-0.5, 0.5)``.
    """

    region: np.ndarray
    base_stations: tuple[BaseStation, ...]
    users: tuple[User, ...]
    channel: ChannelParams
    seed: int
    wrap: bool = False
    tier_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.base_stations:
            raise InvalidConfigError("scenario has no base stations")
        if not self.users:
            raise InvalidConfigError("scenario has no users")
        if len({b.id for b in self.base_stations}) != len(self.base_stations):
            raise InvalidConfigError("duplicate base-station ids")
        if len({u.id for u in self.users}) != len(self.users):
            raise InvalidConfigError("duplicate user ids")
        for b in self.base_stations:
            if not 0 <= b.tier < self.channel.n_tiers:
                raise InvalidConfigError(f"BS {b.id} has invalid tier {b.tier}")
            if not np.isfinite(b.power_dbm):
                raise InvalidConfigError(f"BS {b.id} has non-finite power")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_bs(self) -> int:
        return len(self.base_stations)

    @property
    def bs_positions(self) -> np.ndarray:
        return np.array([b.position for b in self.base_stations], dtype=float)

    @property
    def user_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.users], dtype=float)

    @property
    def bs_tiers(self) -> np.ndarray:
        return np.array([b.tier for b in self.base_stations], dtype=int)

    @property
    def bs_power_dbm(self) -> np.ndarray:
        return np.array([b.power_dbm for b in self.base_stations], dtype=float)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "wrap": self.wrap,
            "region": self.region.tolist(),
            "tier_names": list(self.tier_names),
            "channel": asdict(self.channel),
            "base_stations": [asdict(b) for b in self.base_stations],
            "users": [asdict(u) for u in self.users],
        }


def _hex_macro_sites(n_macro: int, isd: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (region basis, macro positions) for an ``n_macro`` hex cluster."""
    try:
        i, j = _HEX_CLUSTERS[n_macro]
    except KeyError:
        raise InvalidConfigError(
            f"n_macro={n_macro} is not a hexagonal cluster size; "
            f"choose one of {sorted(_HEX_CLUSTERS)}") from None
    u = np.array([isd, 0.0])
    v = np.array([isd / 2.0, isd * np.sqrt(3.0) / 2.0])
    a = i * u + j * v
    rot = np.array([[0.5, -np.sqrt(3.0) / 2.0], [np.sqrt(3.0) / 2.0, 0.5]])
    basis = np.vstack([a, rot @ a])

    m = i + j + 1
    grid = np.array([p * u + q * v for p in range(-3 * m, 3 * m + 1)
                     for q in range(-3 * m, 3 * m + 1)])
    st = np.linalg.solve(basis.T, grid.T).T
    st = st - np.floor(st + 0.5)  # fold into [-0.5, 0.5)
    st = np.round(st, 9)
    st[st >= 0.5] -= 1.0
    uniq = np.unique(st, axis=0)
    assert len(uniq) == n_macro, (len(uniq), n_macro)
    # order sites by distance from the centre for stable ids
    pos = np.round(uniq @ basis, 6) + 0.0  # snap folding noise, drop -0.0
    order = np.lexsort((pos[:, 1], pos[:, 0], np.round(np.hypot(pos[:, 0], pos[:, 1]), 6)))
    return basis, pos[order]


def _uniform_in_region(rng: np.random.Generator, basis: np.ndarray, n: int) -> np.ndarray:
    st = rng.uniform(-0.5, 0.5, size=(n, 2))
    return st @ basis


def generate_scenario(config: ScenarioConfig, seed: int | None = None) -> Scenario:
    """Draw a scenario from ``config``; ``seed`` overrides ``config.seed``."""
    seed = config.seed if seed is None else seed
    if config.n_users <= 0:
        raise InvalidConfigError("n_users must be positive")
    if not config.tiers:
        raise InvalidConfigError("at least one tier is required")
    channel = config.channel_params()
    layout = config.macro_layout
    basis, macros = _hex_macro_sites(layout.n_macro, layout.isd_m)

    pos_seq, _ = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(pos_seq)

    bss = [BaseStation(k, 0, (float(x), float(y)), config.tiers[0].power_dbm)
           for k, (x, y) in enumerate(macros)]
    for tier_idx, tier in enumerate(config.tiers[1:], start=1):
        if tier.count_per_macro is not None:
            n = int(round(tier.count_per_macro * layout.n_macro))
        elif tier.density is not None:
            n = int(rng.poisson(tier.density * layout.n_macro))
        else:
            raise InvalidConfigError(
                f"tier {tier.name!r} needs count_per_macro or density")
        for x, y in _uniform_in_region(rng, basis, n):
            bss.append(BaseStation(len(bss), tier_idx, (float(x), float(y)), tier.power_dbm))

    users = tuple(User(k, (float(x), float(y)))
                  for k, (x, y) in enumerate(_uniform_in_region(rng, basis, config.n_users)))
    return Scenario(region=basis, base_stations=tuple(bss), users=users,
                    channel=channel, seed=seed, wrap=layout.wrap,
                    tier_names=tuple(t.name for t in config.tiers))


def path_loss_db(tier: int, distance, params: ChannelParams):
    """Path loss in dB at ``distance`` meters, clamped below at ``params.d_min_m``."""
    d = np.maximum(np.asarray(distance, dtype=float), params.d_min_m)
    return params.intercept_db[tier] + params.slope_db[tier] * np.log10(d)


def distances(scenario: Scenario) -> np.ndarray:
    """User-to-BS distances (N_U x N_B), minimum image when wrapped."""
    diff = scenario.user_positions[:, None, :] - scenario.bs_positions[None, :, :]
    if not scenario.wrap:
        return np.hypot(diff[..., 0], diff[..., 1])
    basis = scenario.region
    st = diff @ np.linalg.inv(basis)
    st = st - np.round(st)
    best = None
    for p in (-1, 0, 1):
        for q in (-1, 0, 1):
            d = (st + np.array([p, q])) @ basis
            d = np.hypot(d[..., 0], d[..., 1])
            best = d if best is None else np.minimum(best, d)
    return best


@dataclass(frozen=True, eq=False)
class LinkTable:
    """Dense per-link tables: linear gain, linear SINR and spectral efficiency."""

    gain: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    bs_tier: np.ndarray
    user_ids: np.ndarray | None = None
    bs_ids: np.ndarray | None = None

    def __post_init__(self):
        for name in ("gain", "sinr", "rate"):
            a = getattr(self, name)
            if not (np.all(np.isfinite(a)) and np.all(a > 0)):
                raise ValueError(f"LinkTable.{name} must be finite and positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.rate.shape

    @property
    def n_users(self) -> int:
        return self.rate.shape[0]

    @property
    def n_bs(self) -> int:
        return self.rate.shape[1]

    @property
    def log_rate(self) -> np.ndarray:
        return np.log(self.rate)

    @classmethod
    def from_rates(cls, rate, bs_tier=None) -> "LinkTable":
        """Synthetic table from spectral efficiencies alone.

        SINR is recovered as ``2**c - 1`` and the gain column is set equal to
        it (unit power, unit noise, no interference).
        """
        rate = np.atleast_2d(np.asarray(rate, dtype=float))
        sinr = np.expm1(rate * np.log(2.0))
        if bs_tier is None:
            bs_tier = np.zeros(rate.shape[1], dtype=int)
        return cls(gain=sinr.copy(), sinr=sinr, rate=rate,
                   bs_tier=np.asarray(bs_tier, dtype=int))

    def to_csv(self, path) -> None:
        uid = self.user_ids if self.user_ids is not None else np.arange(self.n_users)
        bid = self.bs_ids if self.bs_ids is not None else np.arange(self.n_bs)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["user_id", "bs_id", "gain", "sinr_db", "rate_bps_hz"])
            for i in range(self.n_users):
                for j in range(self.n_bs):
                    w.writerow([int(uid[i]), int(bid[j]), repr(float(self.gain[i, j])),
                                repr(float(lin2db(self.sinr[i, j]))),
                                repr(float(self.rate[i, j]))])


def sinr_from_gains(gain: np.ndarray, power_mw: np.ndarray, noise_mw: float) -> np.ndarray:
    received = gain * power_mw[None, :]
    interference = received.sum(axis=1, keepdims=True) - received
    return received / (interference + noise_mw)


def compute_link_table(scenario: Scenario, shadowing: bool = True) -> LinkTable:
    """Gains, SINR and ``log2(1 + SINR)`` for every (user, BS) pair.

    Shadowing is i.i.d. Normal(0, sigma_s^2) in dB per link, drawn from a
    stream derived from the scenario seed (independent of the position
    stream), so the table is a pure function of the scenario.
    """
    ch = scenario.channel
    d = distances(scenario)
    tiers = scenario.bs_tiers
    intercept = np.asarray(ch.intercept_db)[tiers]
    slope = np.asarray(ch.slope_db)[tiers]
    loss_db = intercept[None, :] + slope[None, :] * np.log10(np.maximum(d, ch.d_min_m))
    if shadowing and ch.shadowing_db > 0:
        _, shadow_seq = np.random.SeedSequence(scenario.seed).spawn(2)
        rng = np.random.default_rng(shadow_seq)
        loss_db = loss_db + rng.normal(0.0, ch.shadowing_db, size=loss_db.shape)
    gain = db2lin(-loss_db)
    sinr = sinr_from_gains(gain, db2lin(scenario.bs_power_dbm), ch.noise_mw)
    return LinkTable(
        gain=gain, sinr=sinr, rate=np.log1p(sinr) / np.log(2.0), bs_tier=tiers,
        user_ids=np.array([u.id for u in scenario.users]),
        bs_ids=np.array([b.id for b in scenario.base_stations]),
    )


def load_scenario_config(path: str | Path) -> ScenarioConfig:
    return ScenarioConfig.load(path)
