import numpy as np
import pytest

from hetassoc.topology import (LinkTable, MacroLayout, ScenarioConfig, TierConfig,
                               compute_link_table, generate_scenario, three_tier_config)


def random_links(rng, n_users, n_bs, lo=0.1, hi=5.0, n_tiers=1):
    rate = rng.uniform(lo, hi, size=(n_users, n_bs))
    tiers = np.arange(n_bs) % n_tiers
    return LinkTable.from_rates(rate, tiers)


@pytest.fixture(scope="session")
def three_tier_links():
    """Link tables of the first few three-tier scenarios."""
    return [compute_link_table(generate_scenario(three_tier_config(), s)) for s in range(3)]


@pytest.fixture
def single_cell_config():
    tiers = (
        TierConfig("macro", 46.0, 34.0, 40.0),
        TierConfig("pico", 35.0, 34.0, 40.0, count_per_macro=5),
        TierConfig("femto", 20.0, 37.0, 30.0, count_per_macro=20),
    )
    return ScenarioConfig(tiers=tiers, macro_layout=MacroLayout(n_macro=1, isd_m=500.0),
                          n_users=100)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
