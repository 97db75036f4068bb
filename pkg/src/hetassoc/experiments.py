"""
Multi-seed scheme comparisons, rate statistics, and bias-factor search.

A trial draws one scenario (seed ``seed_base + trial``), builds its link
table and evaluates every requested scheme on it. Rates are pooled over all
users and trials before quantiles are taken; utilities and tier loads are
averaged over trials.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .association import (Association, BiasConfig, biased_rate_assoc, biased_sinr_assoc,
                          loads, long_term_rates, max_sinr_assoc, parse_factor,
                          round_fractional, tier_loads)
from .dual_solver import run_dual
from .fua_solver import DEFAULT_MAX_ITER, solve_fua, xlogx
from .joint_solver import joint_from_fua, solve_joint
from .topology import (InvalidConfigError, LinkTable, ScenarioConfig, compute_link_table,
                       generate_scenario, three_tier_config)

SCHEMES = ("max-sinr", "fua", "fua-rounded", "dual", "joint", "sinr-bias", "rate-bias")
DEFAULT_SCHEMES = ("max-sinr", "fua", "fua-rounded", "dual", "joint")
BASELINE = "max-sinr"
DEFAULT_PERCENTILES = tuple(float(p) for p in range(1, 100))


class UndefinedRatioError(ZeroDivisionError):
    """The baseline quantile is zero, so the rate ratio is undefined."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a comparison run needs.

    ``bias_grid_db`` is ``(start, stop, step)`` in dB, inclusive of ``stop``.
    ``sinr_bias`` / ``rate_bias`` fix per-tier factors (linear, or strings
    with a ``dB`` suffix); when a bias scheme is requested without factors,
    they are found on the same trials.
    """

    scenario: ScenarioConfig = field(default_factory=three_tier_config)
    schemes: tuple[str, ...] = DEFAULT_SCHEMES
    trials: int = 20
    seed_base: int = 0
    tol: float | None = None
    max_iter: int = DEFAULT_MAX_ITER
    dual_max_iter: int = 500
    bias_grid_db: tuple[float, float, float] = (0.0, 18.0, 0.5)
    sinr_bias: tuple[float, ...] | None = None
    rate_bias: tuple[float, ...] | None = None
    ratio_percentiles: tuple[float, ...] = (10.0, 50.0)
    out_dir: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidConfigError("trials must be at least 1")
        start, stop, step = self.bias_grid_db
        if not step > 0:
            raise InvalidConfigError("bias grid step must be positive")
        if stop < start:
            raise InvalidConfigError("bias grid stop must not be below start")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise InvalidConfigError(f"unknown schemes {unknown}; choose from {SCHEMES}")
        if len(set(self.schemes)) != len(self.schemes):
            raise InvalidConfigError("duplicate scheme names")
        if self.tol is not None and not self.tol > 0:
            raise InvalidConfigError("tol must be positive")
        for name in ("sinr_bias", "rate_bias"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(parse_factor(a) for a in v))

    @property
    def grid_db(self) -> np.ndarray:
        start, stop, step = self.bias_grid_db
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)

    @property
    def seeds(self) -> list[int]:
        return [self.seed_base + t for t in range(self.trials)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        """Build from a JSON-style mapping.

        ``scenario`` may be an inline scenario mapping or a path to one
        (relative paths resolve against ``base_dir``); a mapping with a
        top-level ``tiers`` key is read as a bare scenario config.
        """
        d = dict(d)
        if "tiers" in d:
            return cls(scenario=ScenarioConfig.from_dict(d))
        sc = d.pop("scenario", None)
        if isinstance(sc, str):
            p = Path(sc)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            scenario = ScenarioConfig.load(p)
        elif isinstance(sc, dict):
            scenario = ScenarioConfig.from_dict(sc)
        else:
            scenario = three_tier_config()
        for key in ("schemes", "bias_grid_db", "sinr_bias", "rate_bias", "ratio_percentiles"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        try:
            return cls(scenario=scenario, **d)
        except TypeError as e:
            raise InvalidConfigError(str(e)) from e

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as f:
            return cls.from_dict(json.load(f), base_dir=path.parent)


@dataclass(eq=False)
class SchemeMetrics:
    name: str
    utilities: list[float]
    tier_loads: list[np.ndarray]  # per trial, total load per tier
    tier_bs_counts: list[np.ndarray]
    rates: np.ndarray  # pooled over users and trials
    cdf: np.ndarray  # quantiles at MetricsReport.percentiles
    ratios: dict[float, float] = field(default_factory=dict)

    @property
    def utility(self) -> float:
        return float(np.mean(self.utilities))

    @property
    def mean_tier_load(self) -> np.ndarray:
        """Total load per tier averaged over trials (sums to N_U)."""
        return np.mean(self.tier_loads, axis=0)

    @property
    def mean_load_per_bs(self) -> np.ndarray:
        """Per-BS load of each tier, averaged over trials."""
        per_trial = [np.divide(k, n, out=np.zeros_like(k), where=n > 0)
                     for k, n in zip(self.tier_loads, self.tier_bs_counts)]
        return np.mean(per_trial, axis=0)


@dataclass
class TrialRecord:
    seed: int
    n_users: int
    utilities: dict[str, float]
    flags: dict[str, object]
    violations: list[str]


@dataclass(eq=False)
class MetricsReport:
    config: ExperimentConfig
    percentiles: tuple[float, ...]
    schemes: dict[str, SchemeMetrics]
    trials: list[TrialRecord]
    convergence: dict[str, list[tuple]]  # solver -> rows (trial, iter, objective, gap)
    bias: dict[str, BiasConfig]  # "sinr" / "rate" -> factors used or found
    bias_notes: dict[str, object] = field(default_factory=dict)

    @property
    def violations(self) -> list[str]:
        return [f"seed {t.seed}: {v}" for t in self.trials for v in t.violations]

    @property
    def nonconverged(self) -> list[str]:
        out = []
        for t in self.trials:
            for k, v in t.flags.items():
                if k.endswith("_converged") and v is False:
                    out.append(f"seed {t.seed}: {k[:-len('_converged')]} did not converge")
        return out

    def summary(self) -> dict:
        s = {
            "n_trials": len(self.trials),
            "seeds": [t.seed for t in self.trials],
            "schemes": {},
            "bias": {k: {"sinr": list(b.sinr), "rate": None if b.rate is None else list(b.rate)}
                     for k, b in sorted(self.bias.items())},
            "bias_notes": self.bias_notes,
            "violations": self.violations,
            "nonconverged": self.nonconverged,
            "trials": [{"seed": t.seed, "utilities": t.utilities, "flags": t.flags}
                       for t in self.trials],
        }
        for name, m in self.schemes.items():
            s["schemes"][name] = {
                "utility": m.utility,
                "tier_load": m.mean_tier_load.tolist(),
                "load_per_bs": m.mean_load_per_bs.tolist(),
                "ratios": {repr(p): r for p, r in m.ratios.items()},
            }
        return s


def rate_cdf(samples, percentiles=DEFAULT_PERCENTILES) -> np.ndarray:
    """Empirical quantiles (linear interpolation between order statistics)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("rate_cdf needs at least one sample")
    q = np.percentile(x, np.asarray(percentiles, dtype=float), method="linear")
    # guard against rounding in the interpolation
    return np.maximum.accumulate(q)


def rate_ratio_at_percentile(scheme, baseline, p: float) -> float:
    s = np.asarray(scheme, dtype=float).ravel()
    b = np.asarray(baseline, dtype=float).ravel()
    if s.size == 0 or b.size == 0:
        raise ValueError("both sample sets must be nonempty")
    qb = float(np.percentile(b, p, method="linear"))
    if qb == 0.0:
        raise UndefinedRatioError(f"baseline quantile at p={p} is zero")
    return float(np.percentile(s, p, method="linear")) / qb


def relative_range(values) -> float:
    """``(max - min) / mean`` of a positive sequence."""
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / v.mean())


# ---------------------------------------------------------------- bias factors

def _tier_best(links: LinkTable, n_tiers: int) -> tuple[np.ndarray, np.ndarray]:
    """Strongest BS per (user, tier) and its SINR in dB (-inf if the tier is empty)."""
    n_u = links.n_users
    best_bs = np.zeros((n_u, n_tiers), dtype=int)
    best_db = np.full((n_u, n_tiers), -np.inf)
    sinr_db = 10.0 * np.log10(links.sinr)
    for k in range(n_tiers):
        cols = np.flatnonzero(links.bs_tier == k)
        if cols.size:
            a = np.argmax(sinr_db[:, cols], axis=1)
            best_bs[:, k] = cols[a]
            best_db[:, k] = sinr_db[np.arange(n_u), cols[a]]
    return best_bs, best_db


def _grid_utilities(links: LinkTable, n_tiers: int, tuples_db: np.ndarray) -> np.ndarray:
    """Utility of max biased-SINR association for each row of per-tier dB biases."""
    best_bs, best_db = _tier_best(links, n_tiers)
    logc = links.log_rate
    n_u = links.n_users
    rows = np.arange(n_u)
    out = np.empty(len(tuples_db))
    for start in range(0, len(tuples_db), 256):
        chunk = tuples_db[start:start + 256]
        tier = np.argmax(best_db[None, :, :] + chunk[:, None, :], axis=2)
        bs = best_bs[rows[None, :], tier]
        gain = logc[rows[None, :], bs].sum(axis=1)
        for k in range(len(chunk)):
            kload = np.bincount(bs[k], minlength=links.n_bs)
            out[start + k] = gain[k] - xlogx(kload).sum()
    return out


@dataclass(frozen=True)
class BiasSearchResult:
    bias: BiasConfig
    utility: float  # mean over trials at the chosen factors
    baseline_utility: float  # mean max-SINR utility
    fua_gap: float | None  # mean FUA utility minus ``utility``
    n_evaluated: int


def _trial_links(config: ExperimentConfig, scenario: ScenarioConfig | None = None):
    sc = config.scenario if scenario is None else scenario
    return [compute_link_table(generate_scenario(sc, seed)) for seed in config.seeds]


def sinr_bias_search(config: ExperimentConfig, fua_utility: float | None = None,
                     links: list[LinkTable] | None = None) -> BiasSearchResult:
    """Exhaustive search over per-tier SINR biases on the configured dB grid.

    The macro tier stays at 0 dB. The tuple with the largest mean utility
    across trials wins; ties go to the first tuple in lexicographic order,
    so the all-zero tuple wins whenever nothing beats max-SINR.
    ``fua_utility`` is the mean FUA utility used for the reported gap.
    """
    links = _trial_links(config) if links is None else links
    n_tiers = len(config.scenario.tiers)
    grid = config.grid_db
    if grid[0] > 0 or 0.0 not in grid:
        # the baseline tuple must be a candidate
        grid = np.unique(np.concatenate([[0.0], grid]))
    tuples = np.array([(0.0, *t) for t in itertools.product(grid, repeat=n_tiers - 1)])
    total = np.zeros(len(tuples))
    for lt in links:
        total += _grid_utilities(lt, n_tiers, tuples)
    mean = total / len(links)
    best = int(np.argmax(mean))
    base = int(np.flatnonzero(np.all(tuples == 0.0, axis=1))[0])
    factors = tuple(float(10.0 ** (d / 10.0)) for d in tuples[best])
    return BiasSearchResult(
        bias=BiasConfig(factors),
        utility=float(mean[best]),
        baseline_utility=float(mean[base]),
        fua_gap=None if fua_utility is None else float(fua_utility - mean[best]),
        n_evaluated=len(tuples),
    )


def rate_bias_from_dual(dual_mu, tiers, n_tiers: int | None = None) -> BiasConfig:
    """Per-tier mean of ``exp(-mu_j)``, normalised so the macro tier is 1.

    ``dual_mu`` and ``tiers`` may be single arrays or lists of arrays (one per
    trial); lists are pooled over all BSs of all trials.
    """
    if isinstance(dual_mu, (list, tuple)) and dual_mu and np.ndim(dual_mu[0]) > 0:
        mu = np.concatenate([np.asarray(m, dtype=float) for m in dual_mu])
        tr = np.concatenate([np.asarray(t, dtype=int) for t in tiers])
    else:
        mu = np.asarray(dual_mu, dtype=float)
        tr = np.asarray(tiers, dtype=int)
    n = int(tr.max()) + 1 if n_tiers is None else n_tiers
    b = np.exp(-mu)
    sums = np.bincount(tr, weights=b, minlength=n)
    counts = np.bincount(tr, minlength=n)
    if np.any(counts == 0):
        raise ValueError("every tier needs at least one BS")
    mean = sums / counts
    return BiasConfig(sinr=(1.0,) * n, rate=tuple(float(v) for v in mean / mean[0]))


# ----------------------------------------------------------------- comparison

@dataclass(eq=False)
class _TrialOutcome:
    seed: int
    links: LinkTable
    assoc: dict[str, np.ndarray]  # scheme -> per-BS association mass (N_U x N_B)
    rates: dict[str, np.ndarray]
    utilities: dict[str, float]
    flags: dict[str, object]
    traces: dict[str, list[tuple]]
    dual_mu: np.ndarray | None


def _evaluate(assoc: Association, links: LinkTable):
    out = long_term_rates(assoc, links)
    return assoc.x, out.rates, out.utility


def _run_trial(config: ExperimentConfig, seed: int, need: set[str]) -> _TrialOutcome:
    links = compute_link_table(generate_scenario(config.scenario, seed))
    assoc, rates, util, flags, traces = {}, {}, {}, {}, {}
    dual_mu = None

    if "max-sinr" in need:
        assoc["max-sinr"], rates["max-sinr"], util["max-sinr"] = _evaluate(max_sinr_assoc(links), links)
    fua = None
    if need & {"fua", "fua-rounded", "joint"}:
        fua = solve_fua(links, tol=config.tol, max_iter=config.max_iter)
        flags["fua_converged"] = fua.converged
        flags["fua_iterations"] = fua.iterations
        traces["fua"] = [(it, u, g) for it, u, g in fua.trace]
        assoc["fua"], rates["fua"], _ = _evaluate(fua.assoc, links)
        util["fua"] = fua.utility
        if "fua-rounded" in need:
            assoc["fua-rounded"], rates["fua-rounded"], util["fua-rounded"] = _evaluate(
                round_fractional(fua.assoc), links)
    if "joint" in need:
        # warm start from the FUA optimum keeps the joint value above it
        joint = solve_joint(links, tol=config.tol, max_iter=config.max_iter,
                            y0=joint_from_fua(fua.assoc))
        flags["joint_converged"] = joint.converged
        flags["joint_iterations"] = joint.iterations
        traces["joint"] = [(it, u, g) for it, u, g in joint.trace]
        assoc["joint"] = joint.association_mass(links)
        rates["joint"], util["joint"] = joint.rates, joint.utility
    if need & {"dual", "rate-bias"}:
        d_ref = fua.utility if fua is not None else None
        dual = run_dual(links, max_iter=config.dual_max_iter, d_ref=d_ref)
        flags["dual_converged"] = dual.converged
        flags["dual_stop"] = dual.stop_reason
        flags["dual_iterations"] = dual.iterations
        flags["dual_balanced_at"] = dual.balanced_at
        flags["dual_unbalanced_bs"] = int(dual.unbalanced_bs.size)
        if dual.bound_ok is not None:
            flags["dual_bound_ok"] = dual.bound_ok
        tr = dual.trace
        traces["dual"] = [(t, tr.dual_value[t], tr.max_imbalance[t]) for t in range(len(tr))]
        dual_mu = dual.state.best_mu
        if "dual" in need:
            assoc["dual"], rates["dual"], util["dual"] = _evaluate(dual.assoc, links)
    return _TrialOutcome(seed, links, assoc, rates, util, flags, traces, dual_mu)


def _check_ordering(util: dict[str, float], n_users: int) -> list[str]:
    slack = 1e-6 * n_users
    out = []
    for hi, lo in (("joint", "fua"), ("fua", "fua-rounded"), ("fua", "max-sinr")):
        if hi in util and lo in util and util[hi] < util[lo] - slack:
            out.append(f"utility of {hi} ({util[hi]:.6f}) below {lo} ({util[lo]:.6f})")
    return out


def run_comparison(config: ExperimentConfig) -> MetricsReport:
    """Evaluate every configured scheme on ``config.trials`` seeded scenarios."""
    schemes = list(config.schemes)
    need = set(schemes)
    n_tiers = len(config.scenario.tiers)
    outcomes = [_run_trial(config, seed, need) for seed in config.seeds]

    bias, notes = {}, {}
    if "sinr-bias" in need:
        if config.sinr_bias is not None:
            bias["sinr"] = BiasConfig(config.sinr_bias)
        else:
            fua_u = (float(np.mean([o.utilities["fua"] for o in outcomes]))
                     if "fua" in outcomes[0].utilities else None)
            found = sinr_bias_search(config, fua_u, links=[o.links for o in outcomes])
            bias["sinr"] = found.bias
            notes["sinr_search"] = {"utility": found.utility, "fua_gap": found.fua_gap,
                                    "baseline_utility": found.baseline_utility,
                                    "sinr_db": list(found.bias.sinr_db)}
    if "rate-bias" in need:
        if config.rate_bias is not None:
            bias["rate"] = BiasConfig((1.0,) * n_tiers, config.rate_bias)
        else:
            bias["rate"] = rate_bias_from_dual([o.dual_mu for o in outcomes],
                                               [o.links.bs_tier for o in outcomes], n_tiers)
    for o in outcomes:
        if "sinr-bias" in need:
            a = biased_sinr_assoc(o.links, bias["sinr"])
            o.assoc["sinr-bias"], o.rates["sinr-bias"], o.utilities["sinr-bias"] = _evaluate(a, o.links)
        if "rate-bias" in need:
            a = biased_rate_assoc(o.links, bias["rate"])
            o.assoc["rate-bias"], o.rates["rate-bias"], o.utilities["rate-bias"] = _evaluate(a, o.links)

    percentiles = DEFAULT_PERCENTILES
    metrics = {}
    for s in schemes:
        rates = np.concatenate([o.rates[s] for o in outcomes])
        tl = [tier_loads(o.assoc[s].sum(axis=0), o.links.bs_tier, n_tiers) for o in outcomes]
        counts = [np.bincount(o.links.bs_tier, minlength=n_tiers).astype(float) for o in outcomes]
        metrics[s] = SchemeMetrics(s, [o.utilities[s] for o in outcomes], tl, counts, rates,
                                   rate_cdf(rates, percentiles))
    if BASELINE in metrics:
        base = metrics[BASELINE].rates
        for m in metrics.values():
            m.ratios = {float(p): rate_ratio_at_percentile(m.rates, base, p)
                        for p in config.ratio_percentiles}

    records = []
    for o in outcomes:
        viol = _check_ordering(o.utilities, o.links.n_users)
        for s in schemes:
            if not np.isclose(o.assoc[s].sum(), o.links.n_users, rtol=0, atol=1e-6 * o.links.n_users):
                viol.append(f"tier loads of {s} do not sum to N_U")
        records.append(TrialRecord(o.seed, o.links.n_users,
                                   {s: o.utilities[s] for s in schemes}, o.flags, viol))
    convergence = {}
    for solver in ("fua", "joint", "dual"):
        rows = [(t, *row) for t, o in enumerate(outcomes) for row in o.traces.get(solver, [])]
        if rows:
            convergence[solver] = rows
    return MetricsReport(config, percentiles, metrics, records, convergence, bias, notes)


# ---------------------------------------------------------------- bias sweeps

@dataclass(eq=False)
class SweepReport:
    param: str  # "density" or "power"
    tier: int
    values: list[float]
    rate_bias: list[tuple[float, ...]]
    sinr_bias: list[tuple[float, ...]] | None = None

    def relative_ranges(self) -> list[float]:
        """Relative range of each tier's rate factor across the sweep."""
        b = np.array(self.rate_bias)
        return [relative_range(b[:, k]) for k in range(b.shape[1])]


def _swept_scenario(scenario: ScenarioConfig, param: str, tier: int, value: float) -> ScenarioConfig:
    t = scenario.tiers[tier]
    if param == "power":
        return scenario.replace_tier(tier, power_dbm=float(value))
    if param == "density":
        if t.density is not None and t.count_per_macro is None:
            return scenario.replace_tier(tier, density=float(value))
        return scenario.replace_tier(tier, count_per_macro=float(value))
    raise ValueError(f"unknown sweep parameter {param!r}")


def rate_bias_for(config: ExperimentConfig, scenario: ScenarioConfig | None = None) -> BiasConfig:
    """Pooled rate-bias factors from dual runs on every trial."""
    sc = config.scenario if scenario is None else scenario
    mus, tiers = [], []
    for lt in _trial_links(config, sc):
        mus.append(run_dual(lt, max_iter=config.dual_max_iter).state.best_mu)
        tiers.append(lt.bs_tier)
    return rate_bias_from_dual(mus, tiers, len(sc.tiers))


def bias_sweep(config: ExperimentConfig, param: str, tier: int, values,
               include_sinr: bool = False) -> SweepReport:
    """Recompute the bias factors while one tier's density or power varies.

    ``tier`` is the 0-based tier index; ``values`` are per-macro counts (or
    Poisson means) for ``density`` and dBm for ``power``.
    """
    if not 0 <= tier < len(config.scenario.tiers):
        raise ValueError(f"tier {tier} out of range")
    if param == "density" and tier == 0:
        raise ValueError("the macro layout is fixed; sweep a small-cell tier")
    values = [float(v) for v in values]
    if not values:
        raise ValueError("sweep needs at least one value")
    rate, sinr = [], [] if include_sinr else None
    for v in values:
        sc = _swept_scenario(config.scenario, param, tier, v)
        rate.append(rate_bias_for(config, sc).rate)
        if include_sinr:
            cfg = replace(config, scenario=sc)
            sinr.append(sinr_bias_search(cfg).bias.sinr)
    return SweepReport(param, tier, values, rate, sinr)


# -------------------------------------------------------------------- export

def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_summary(summary: dict, path: Path) -> None:
    with open(path, "w") as f:
        json.dump(_jsonable(summary), f, indent=2, sort_keys=True)
        f.write("\n")


def export_report(report: MetricsReport, out_dir) -> list[Path]:
    """Write the report as CSV tables plus ``summary.json``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    names = list(report.schemes)
    if names:
        n_tiers = len(next(iter(report.schemes.values())).mean_tier_load)
        p = out / "loads.csv"
        _write_csv(p, ["scheme", "tier", "total_load", "load_per_bs"],
                   [[s, k + 1, _fmt(m.mean_tier_load[k]), _fmt(m.mean_load_per_bs[k])]
                    for s, m in report.schemes.items() for k in range(n_tiers)])
        written.append(p)

        p = out / "cdf.csv"
        _write_csv(p, ["percentile", *names],
                   [[_fmt(q), *(_fmt(report.schemes[s].cdf[i]) for s in names)]
                    for i, q in enumerate(report.percentiles)])
        written.append(p)

        p = out / "ratios.csv"
        _write_csv(p, ["scheme", "percentile", "ratio_vs_" + BASELINE],
                   [[s, _fmt(q), _fmt(r)] for s, m in report.schemes.items()
                    for q, r in m.ratios.items()])
        written.append(p)

        p = out / "convergence.csv"
        _write_csv(p, ["solver", "trial", "iter", "objective", "gap"],
                   [[solver, t, it, _fmt(obj), _fmt(g)]
                    for solver, rows in report.convergence.items()
                    for t, it, obj, g in rows])
        written.append(p)

        p = out / "bias.csv"
        rows = []
        for kind, b in sorted(report.bias.items()):
            factors = b.sinr if kind == "sinr" else b.rate
            rows += [[kind, k + 1, _fmt(a), _fmt(10 * np.log10(a))] for k, a in enumerate(factors)]
        _write_csv(p, ["kind", "tier", "factor", "factor_db"], rows)
        written.append(p)

    p = out / "summary.json"
    write_summary(report.summary(), p)
    written.append(p)
    return written


def export_sweep(report: SweepReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(report.rate_bias[0])
    rows = []
    for i, v in enumerate(report.values):
        row = [_fmt(v), *(_fmt(b) for b in report.rate_bias[i])]
        if report.sinr_bias is not None:
            row += [_fmt(a) for a in report.sinr_bias[i]]
        rows.append(row)
    header = [report.param, *(f"rate_tier{k + 1}" for k in range(n))]
    if report.sinr_bias is not None:
        header += [f"sinr_tier{k + 1}" for k in range(n)]
    p = out / "sweep.csv"
    _write_csv(p, header, rows)
    s = out / "summary.json"
    write_summary({"param": report.param, "tier": report.tier + 1, "values": report.values,
                   "rate_bias": report.rate_bias, "sinr_bias": report.sinr_bias,
                   "rate_relative_range": report.relative_ranges()}, s)
    return [p, s]
