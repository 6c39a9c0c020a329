"""Supply-to-demand ratio (SDR) pricing for the P2P platform."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

SDR_CAP = 100.0


class PriceBoundsError(ValueError):
    pass


@dataclass(frozen=True)
class PriceBounds:
    """ESP import/export prices and the compensation price, all in £/kWh."""

    import_price: float = 0.05
    export_price: float = 0.03
    compensation: float | None = None

    def __post_init__(self):
        if self.compensation is None:
            object.__setattr__(self, "compensation", (self.import_price - self.export_price) / 2)
        if not (self.import_price >= self.export_price >= 0):
            raise PriceBoundsError(
                f"need import >= export >= 0, got {self.import_price}, {self.export_price}"
            )
        if not (0 <= self.compensation <= self.import_price - self.export_price):
            raise PriceBoundsError(
                f"compensation {self.compensation} outside [0, {self.import_price - self.export_price}]"
            )


@dataclass(frozen=True)
class SlotPrices:
    sdr: float
    buy: float
    sell: float


def compute_sdr(supplies: Sequence[float], demands: Sequence[float]) -> float:
    """Community supply (G + b) over demand, clamped to [0, SDR_CAP]."""
    if len(supplies) != len(demands) or len(supplies) == 0:
        raise ValueError("supplies and demands must be non-empty and equal length")
    supply = float(sum(supplies))
    demand = float(sum(demands))
    if demand <= 0.0:
        return SDR_CAP if supply > 0.0 else 1.0
    return min(max(supply / demand, 0.0), SDR_CAP)


def compute_prices(sdr: float, bounds: PriceBounds) -> SlotPrices:
    lb, ls, lam = bounds.import_price, bounds.export_price, bounds.compensation
    if sdr <= 1.0:
        denom = (lb - ls - lam) * sdr + ls + lam
        sell = lb if denom == 0.0 else (ls + lam) * lb / denom
        buy = sell * sdr + lb * (1.0 - sdr)
    else:
        sell = ls + lam / sdr
        buy = ls + lam
    # guard the bound ordering against rounding
    sell = min(max(sell, ls), lb)
    buy = min(max(buy, sell), lb)
    return SlotPrices(sdr, buy, sell)
