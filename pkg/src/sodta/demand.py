"""Per-source demand profiles over a discrete horizon."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .network import CellKind, Network


@dataclass(frozen=True)
class Horizon:
    T: int
    tau: float = 10.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"horizon needs at least one slot, got T={self.T}")
        if not self.tau > 0:
            raise ValueError(f"slot length must be positive, got {self.tau}")

    @property
    def slots(self) -> range:
        return range(1, self.T + 1)


@dataclass(frozen=True)
class DemandProfile:
    T: int
    entries: Mapping[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for cid, values in self.entries.items():
            vec = tuple(float(v) for v in values)
            if len(vec) != self.T:
                raise ValueError(f"demand for {cid} has {len(vec)} slots, expected {self.T}")
            if any(not math.isfinite(v) or v < 0 for v in vec):
                raise ValueError(f"demand for {cid} must be finite and nonnegative")
            clean[str(cid)] = vec
        object.__setattr__(self, "entries", clean)

    def total(self) -> float:
        return float(sum(sum(v) for v in self.entries.values()))

    def check_sources(self, net: Network) -> None:
        for cid in self.entries:
            if net.cell(cid).kind is not CellKind.SOURCE:
                raise ValueError(f"demand keyed on non-source cell {cid}")

    def as_array(self, cid: str) -> np.ndarray:
        return np.asarray(self.entries.get(cid, (0.0,) * self.T), dtype=float)


def demand_at(profile: DemandProfile, net: Network, cell: str, t: int) -> float:
    if net.cell(cell).kind is not CellKind.SOURCE:
        raise ValueError(f"cell {cell} is not a source")
    if not 1 <= t <= profile.T:
        raise IndexError(f"slot {t} outside 1..{profile.T}")
    vec = profile.entries.get(cell)
    return 0.0 if vec is None else vec[t - 1]


def is_on_slot(t: int, period: int) -> bool:
    """On-off pattern: the first ceil(period/2) slots of every period are on."""
    return (t - 1) % period < (period + 1) // 2


def make_regime_profile(
    horizon: Horizon,
    sources: Sequence[str],
    light_slots: int,
    light_level: float,
    heavy_level: float,
    on_off_period: int = 2,
) -> DemandProfile:
    """Light on-off demand for ``light_slots`` slots, then a constant heavy level."""
    if not 0 <= light_slots <= horizon.T:
        raise ValueError(f"light_slots must lie in 0..{horizon.T}")
    if light_level < 0 or heavy_level < 0:
        raise ValueError("demand levels must be nonnegative")
    if on_off_period < 1:
        raise ValueError("on_off_period must be at least 1")
    vec = [
        (light_level if is_on_slot(t, on_off_period) else 0.0) if t <= light_slots else heavy_level
        for t in horizon.slots
    ]
    return DemandProfile(horizon.T, {s: tuple(vec) for s in sources})


def uniform_profile(T: int, levels: Mapping[str, float], slots: Iterable[int]) -> DemandProfile:
    """Constant demand on the listed slots and zero elsewhere."""
    active = set(slots)
    return DemandProfile(
        T, {s: tuple(lv if t in active else 0.0 for t in range(1, T + 1)) for s, lv in levels.items()}
    )
