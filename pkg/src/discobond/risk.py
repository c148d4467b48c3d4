"""Credit spread and duration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from discobond import analytic
from discobond.errors import AmbiguousTime, NonPositivePrice, OutOfDomain
from discobond.fd import PriceSurface, bilinear
from discobond.model import ModelSpec


@dataclass(frozen=True)
class RiskReport:
    price: float
    gov_price: float
    credit_spread: float
    duration: float


def _coupon_side(t, spec: ModelSpec, side):
    for T in spec.schedule.dates[:-1]:
        if abs(t - T) <= 1e-9:
            if side not in ("before", "after"):
                raise AmbiguousTime(f"t = {t} is a coupon date; pass side='before' or 'after'")
            return T, side
    return None, None


def gov_coupon_bond(r, t: float, spec: ModelSpec, side: str | None = None):
    """Default-free bond with the same cash flows, still to be paid after ``t``.

    At an interior coupon date ``side="before"`` includes that coupon.
    """
    s = spec.schedule
    if not -analytic.TIME_EPS <= t <= s.maturity + analytic.TIME_EPS:
        raise ValueError(f"t = {t} outside [0, {s.maturity}]")
    T_c, side = _coupon_side(t, spec, side)
    if T_c is not None:
        k = s.dates.index(T_c)
        i = k if side == "before" else k + 1
        return analytic.phi(r, T_c, i, spec)
    return analytic.phi(r, t, s.interval_of(t), spec)


def credit_spread(surface: PriceSurface, V, r, t: float, spec: ModelSpec, side=None):
    """``-ln(B / gov) / (T_N - t)``."""
    horizon = spec.schedule.maturity - t
    if not horizon > 0:
        raise ValueError("credit spread needs t < maturity")
    B = np.asarray(surface.query(V, r, t, side), dtype=float)
    if np.any(B <= 0):
        raise NonPositivePrice(f"bond price {B} is not positive")
    gov = gov_coupon_bond(r, t, spec, side)
    cs = -np.log(B / gov) / horizon
    return cs if cs.ndim else float(cs)


def rate_derivative(table: np.ndarray, rs: np.ndarray) -> np.ndarray:
    """``dB/dr`` along the last axis: central inside, first-order one-sided at the ends."""
    return np.gradient(table, rs, axis=-1, edge_order=1)


def duration(surface: PriceSurface, V, r, t: float, side=None):
    """``-(1/B) dB/dr`` with the derivative differenced on the rate nodes.

    Both ``B`` and ``dB/dr`` are tabulated on the nodes and then interpolated
    bilinearly to ``(ln V, r)``.
    """
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0):
        raise OutOfDomain("firm value must be positive")
    table = surface.slice_at(t, side)
    dB = rate_derivative(table, surface.r_nodes)
    x = np.log(V)
    B = bilinear(surface.x_nodes, surface.r_nodes, table, x, r)
    if np.any(np.asarray(B) <= 0):
        raise NonPositivePrice(f"bond price {B} is not positive")
    d = -bilinear(surface.x_nodes, surface.r_nodes, dB, x, r) / B
    return d


def duration_flat_rate(cashflows, r: float, t: float) -> float:
    """Present-value weighted mean time to the payments at a constant rate."""
    flows = [(ti, c) for ti, c in cashflows]
    if not flows:
        raise ValueError("no cash flows")
    if any(ti <= t for ti, _ in flows):
        raise ValueError("every payment must come after t")
    if all(c == 0 for _, c in flows):
        raise ValueError("all cash flows are zero")
    pv = [c * math.exp(-r * (ti - t)) for ti, c in flows]
    total = math.fsum(pv)
    return math.fsum(w * (ti - t) for w, (ti, _) in zip(pv, flows)) / total


def risk_report(surface: PriceSurface, V: float, r: float, t: float, spec: ModelSpec,
                side=None) -> RiskReport:
    price = float(surface.query(V, r, t, side))
    return RiskReport(
        price=price,
        gov_price=float(gov_coupon_bond(r, t, spec, side)),
        credit_spread=float(credit_spread(surface, V, r, t, spec, side)),
        duration=float(duration(surface, V, r, t, side)),
    )
