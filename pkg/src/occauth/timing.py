"""Authentication time budget and frame-length feasibility.

The available time is the travel time over the camera's coverage distance;
the response latency is bit-serial transmission plus compute.  Physically the
two headlights emit two bits per flash slot, so the wall-clock flash schedule
runs at half the bit-serial figure; feasibility gating keeps the conservative
bit-serial form.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "TimingParams",
    "InfeasibleTiming",
    "t_auth",
    "t_latency",
    "max_bits",
    "flash_schedule_duration",
]


class InfeasibleTiming(ValueError):
    """No bits can be flashed within the available time."""


@dataclass(frozen=True)
class TimingParams:
    """Scenario timing knobs.

    d: distance to the camera (m), v: vehicle speed (m/s), t_f: single flash
    duration (s), t_c: computation time (s), n: frame bit count.
    """

    d: float = 25.0
    v: float = 8.3
    t_f: float = 0.15
    t_c: float = 0.4
    n: int = 14

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if self.v <= 0:
            raise ValueError(f"v must be > 0, got {self.v}")
        if self.t_f <= 0:
            raise ValueError(f"t_f must be > 0, got {self.t_f}")
        if self.t_c < 0:
            raise ValueError(f"t_c must be >= 0, got {self.t_c}")
        if self.n <= 0 or self.n % 2:
            raise ValueError(f"n must be positive and even, got {self.n}")

    @property
    def available_s(self) -> float:
        return t_auth(self.d, self.v)

    @property
    def latency_s(self) -> float:
        return t_latency(self.n, self.t_f, self.t_c)


def t_auth(d: float, v: float) -> float:
    """Time to travel distance d at speed v; the response must land inside it."""
    if v <= 0:
        raise ValueError(f"speed must be positive, got {v}")
    return d / v


def t_latency(n: int, t_f: float, t_c: float) -> float:
    """Bit-serial response latency: n flashes of t_f plus compute time."""
    if n < 0:
        raise ValueError(f"bit count must be >= 0, got {n}")
    return n * t_f + t_c


def max_bits(d: float, v: float, t_c: float, t_f: float) -> int:
    """Largest n with n*t_f + t_c <= d/v.

    Raises :class:`InfeasibleTiming` when the compute time alone exhausts the
    budget.
    """
    budget = t_auth(d, v)
    if budget <= t_c:
        raise InfeasibleTiming(
            f"compute time {t_c}s leaves no room in the {budget:.3f}s budget")
    return int((budget - t_c) / t_f)


def flash_schedule_duration(n: int, t_f: float) -> float:
    """Wall-clock span of the flash schedule: two bits per slot, so (n/2)*t_f."""
    if n < 0 or n % 2:
        raise ValueError(f"bit count must be even and >= 0, got {n}")
    return (n // 2) * t_f
