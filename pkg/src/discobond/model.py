"""Model data and the payoff maps that tie the coupon intervals together.

The bond pays ``C_1, ..., C_N`` at ``T_1 < ... < T_N`` and the face ``F`` at
``T_N``.  Default happens either at a coupon date, when the firm value cannot
cover what is owed (recovery ``delta * V``), or at any time with constant
intensity ``lambda_i`` on ``(T_i, T_{i+1}]`` (recovery capped by the value of
the remaining promised cash flows).

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class VasicekParams:
    """Short rate ``dr = (a1 - a2 r) dt + Sr dW``."""

    a1: float
    a2: float
    Sr: float

    def __post_init__(self):
        if not self.a2 > 0:
            raise ValueError(f"a2 must be positive, got {self.a2}")
        if not self.Sr >= 0:
            raise ValueError(f"Sr must be non-negative, got {self.Sr}")

    def drift(self, r):
        return self.a1 - self.a2 * np.asarray(r, dtype=float)


@dataclass(frozen=True)
class FirmDynamics:
    """Firm value ``dV = (r - b) V dt + SV V dW_2`` with ``corr(dW_1, dW_2) = rho``."""

    SV: float
    b: float
    rho: float
    delta: float

    def __post_init__(self):
        if not self.SV > 0:
            raise ValueError(f"SV must be positive, got {self.SV}")
        if not self.b >= 0:
            raise ValueError(f"b must be non-negative, got {self.b}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class CouponSchedule:
    """Payment dates, coupons, face value and one default intensity per interval.

    ``intensities[i]`` applies on ``(T_i, T_{i+1}]`` with ``T_0 = 0``.
    """

    dates: tuple[float, ...]
    coupons: tuple[float, ...]
    face: float
    intensities: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(float(d) for d in self.dates))
        object.__setattr__(self, "coupons", tuple(float(c) for c in self.coupons))
        intens = self.intensities or (0.0,) * len(self.dates)
        object.__setattr__(self, "intensities", tuple(float(v) for v in intens))
        n = len(self.dates)
        if n == 0:
            raise ValueError("schedule needs at least one payment date")
        if len(self.coupons) != n or len(self.intensities) != n:
            raise ValueError(
                f"need {n} coupons and {n} intensities, got "
                f"{len(self.coupons)} and {len(self.intensities)}"
            )
        if not self.dates[0] > 0:
            raise ValueError("first payment date must be positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("payment dates must be strictly increasing")
        if any(c < 0 for c in self.coupons):
            raise ValueError("coupons must be non-negative")
        if not self.face > 0:
            raise ValueError("face value must be positive")
        if any(v < 0 for v in self.intensities):
            raise ValueError("default intensities must be non-negative")

    @property
    def n(self) -> int:
        return len(self.dates)

    @property
    def maturity(self) -> float:
        return self.dates[-1]

    @property
    def boundaries(self) -> tuple[float, ...]:
        """``(T_0, T_1, ..., T_N)`` with ``T_0 = 0``."""
        return (0.0,) + self.dates

    def interval_of(self, t: float) -> int:
        """Index ``i`` with ``T_i <= t < T_{i+1}``; the maturity maps to ``N - 1``."""
        if t < 0 or t > self.maturity:
            raise ValueError(f"t = {t} outside [0, {self.maturity}]")
        for i, T in enumerate(self.dates):
            if t < T:
                return i
        return self.n - 1


@dataclass(frozen=True)
class ModelSpec:
    vasicek: VasicekParams
    firm: FirmDynamics
    schedule: CouponSchedule

    def with_schedule(self, **changes) -> "ModelSpec":
        s = self.schedule
        kw = dict(dates=s.dates, coupons=s.coupons, face=s.face, intensities=s.intensities)
        kw.update(changes)
        return ModelSpec(self.vasicek, self.firm, CouponSchedule(**kw))


def reference_model() -> ModelSpec:
    """Two semi-annual coupons, one-year maturity, rho = 0 (the reference data set)."""
    return ModelSpec(
        vasicek=VasicekParams(a1=0.379 * 0.098, a2=0.379, Sr=0.077),
        firm=FirmDynamics(SV=1.0, b=0.05, rho=0.0, delta=0.5),
        schedule=CouponSchedule(
            dates=(0.5, 1.0), coupons=(1.0, 1.0), face=10.0, intensities=(0.1, 0.3)
        ),
    )


def interface_condition(V, continuation, coupon, delta):
    """Value just before a coupon date given the value just after it.

    The firm pays ``continuation + coupon`` if it can (``V >= continuation +
    coupon``, ties count as solvent); otherwise the holder recovers ``delta * V``.
    """
    V = np.asarray(V, dtype=float)
    owed = np.asarray(continuation, dtype=float) + coupon
    return np.where(V >= owed, owed, delta * V)


def terminal_payoff(V, spec: ModelSpec):
    s = spec.schedule
    return interface_condition(V, s.face, s.coupons[-1], spec.firm.delta)


def recovery_cap(V, phi, delta):
    """Recovery on an unexpected default: ``min(delta * V, phi)``."""
    return np.minimum(delta * np.asarray(V, dtype=float), phi)

