"""Execution, roll and management-fee drag on gross strategy returns."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import MisalignedDates, NegativeCost
from ..market_data import TRADING_DAYS, Instrument

BPS = 1e-4
DEFAULT_MGMT_FEE_BPS = 50.0


def daily_cost(
    turnover: np.ndarray,
    positions: np.ndarray,
    instruments: Sequence[Instrument],
    mgmt_fee_bps_pa: float = DEFAULT_MGMT_FEE_BPS,
) -> np.ndarray:
    """Total cost per day in decimal return units.

    ``turnover`` and ``positions`` are (dates, assets). Execution cost is
    charged per unit of traded notional, roll cost accrues daily on gross
    exposure, the management fee accrues daily on AUM.
    """
    to = np.atleast_2d(np.asarray(turnover, dtype=float))
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if to.shape != pos.shape or to.shape[1] != len(instruments):
        raise MisalignedDates(
            f"turnover {to.shape} and positions {pos.shape} must match ({to.shape[0]}, {len(instruments)})"
        )
    if mgmt_fee_bps_pa < 0:
        raise NegativeCost("management fee must be >= 0")
    tx = np.array([ins.tx_cost_bps for ins in instruments]) * BPS
    roll = np.array([ins.roll_cost_bps for ins in instruments]) * BPS / TRADING_DAYS
    if np.any(tx < 0) or np.any(roll < 0):
        raise NegativeCost("instrument costs must be >= 0")
    return to @ tx + np.abs(pos) @ roll + mgmt_fee_bps_pa * BPS / TRADING_DAYS


def apply_costs(
    gross,
    turnover: np.ndarray,
    positions: np.ndarray,
    instruments: Sequence[Instrument],
    mgmt_fee_bps_pa: float = DEFAULT_MGMT_FEE_BPS,
) -> np.ndarray:
    """Net returns: gross minus execution, roll and fee drag."""
    g = np.asarray(gross, dtype=float)
    cost = daily_cost(turnover, positions, instruments, mgmt_fee_bps_pa)
    if g.shape != cost.shape:
        raise MisalignedDates(f"gross returns {g.shape} do not match cost rows {cost.shape}")
    return g - cost
