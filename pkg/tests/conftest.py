"""Shared fixtures.

Expensive artifacts (valuation grids, the rebalancing-interval study) are
built once per session and shared across test modules.  The environment
variable QUADHEDGE_TIER selects the lattice resolution: the default
"paper" tier runs at eta = 5e-4 with the tight tolerances; "ci" runs at
eta = 2e-3 with the widened tolerances where a check defines them.
"""

from __future__ import annotations

import os

import pytest

from quadhedge.calibration import MarketParams, jump_diffusion_model
from quadhedge.distribution import InversionConfig
from quadhedge.reports import VANILLA_SENTINEL, build_grid

TIER = os.environ.get("QUADHEDGE_TIER", "paper").lower()
TIER_ETA = 2e-3 if TIER == "ci" else 5e-4

DAYS = 250.0
ONE_MONTH = 21.0 / DAYS
SIX_MONTHS = 126.0 / DAYS

SENTINEL = VANILLA_SENTINEL


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance checks (tier: %s, eta %g)"
                                 % (TIER, TIER_ETA))
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one PASS/FAIL summary line per acceptance check."""
    lines = request.config._acceptance_lines

    def record(tag: str, ok: bool, detail: str) -> bool:
        lines.append(f"[{tag}] {'PASS' if ok else 'FAIL'} — {detail}")
        return ok

    return record


@pytest.fixture(scope="session")
def tier_cfg() -> InversionConfig:
    return InversionConfig(eta=TIER_ETA)


@pytest.fixture(scope="session")
def jump_model():
    # price drift 0.1, annual vol 0.2 -> mean log return 0.1 - 0.02
    return jump_diffusion_model(0.1 - 0.5 * 0.2 ** 2, 0.2)


@pytest.fixture(scope="session")
def grid_1m(tier_cfg, jump_model):
    """One-month grid, all 27 cells, Gaussian + leptokurtic model columns."""
    market = MarketParams(mu=0.1, sigma=0.2, r=0.0, delta=1.0 / DAYS)
    return build_grid(market, ONE_MONTH, s0=100.0, cfg=tier_cfg,
                      model=jump_model)


@pytest.fixture(scope="session")
def grid_1m_downdrift_values(tier_cfg, jump_model):
    """Model values only (no risk columns) at the opposite drift."""
    market = MarketParams(mu=-0.1, sigma=0.2, r=0.0, delta=1.0 / DAYS)
    down_model = jump_diffusion_model(-0.1 - 0.5 * 0.2 ** 2, 0.2)
    return build_grid(market, ONE_MONTH, s0=100.0, cfg=tier_cfg,
                      model=down_model, compute_errors=False)


SPOT_6M = {(0.49, SENTINEL), (0.49, 0.10), (0.75, 0.30)}


@pytest.fixture(scope="session")
def grid_6m_spot(tier_cfg):
    """Six-month three-cell spot check (Gaussian columns only)."""
    market = MarketParams(mu=0.1, sigma=0.2, r=0.0, delta=1.0 / DAYS)
    return build_grid(market, SIX_MONTHS, s0=100.0, cfg=tier_cfg,
                      include=SPOT_6M)
