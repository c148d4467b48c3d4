"""Closed-form and quadrature analytics.

Vasicek discount bonds, the value of the remaining promised cash flows, and
the closed-form price on the final coupon interval, where the bond is a
digital plus an asset-or-nothing claim on the forward firm value ``V / Z``
with an extra stream of recovery claims for unexpected default.

Every integral goes through :func:`simpson`, composite Simpson with panel
doubling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfc

from discobond.errors import QuadratureError
from discobond.model import FirmDynamics, ModelSpec, VasicekParams

# slack when comparing times that should coincide
TIME_EPS = 1e-12


@dataclass(frozen=True)
class QuadratureConfig:
    panels: int = 64
    abs_tol: float = 1e-10
    max_panels: int = 1 << 18

    def __post_init__(self):
        if self.panels < 2 or self.panels % 2:
            raise ValueError(f"panels must be even and >= 2, got {self.panels}")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_panels < self.panels:
            raise ValueError("max_panels must be >= panels")


DEFAULT_QUAD = QuadratureConfig()
TAU_QUAD = QuadratureConfig(panels=512)


def simpson_fixed(g: Callable[[np.ndarray], np.ndarray], a: float, b: float, panels: int):
    s = np.linspace(a, b, panels + 1)
    vals = np.asarray(g(s), dtype=float)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    h = (b - a) / panels
    return h / 3.0 * np.tensordot(w, vals, axes=(0, 0))


def simpson(g, a: float, b: float, quad: QuadratureConfig = DEFAULT_QUAD):
    """Integrate ``g`` over ``[a, b]``, doubling panels until two estimates agree.

    ``g`` receives the 1-D node array and returns an array whose leading axis
    runs over the nodes; any trailing axes are integrated independently and
    must all meet ``quad.abs_tol``.
    """
    n = quad.panels
    prev = simpson_fixed(g, a, b, n)
    while True:
        n *= 2
        if n > quad.max_panels:
            raise QuadratureError(
                f"Simpson did not settle to {quad.abs_tol:g} within {quad.max_panels} panels"
            )
        cur = simpson_fixed(g, a, b, n)
        if np.max(np.abs(cur - prev)) < quad.abs_tol:
            return cur
        prev = cur


def _check_order(t, T, what="t"):
    if np.any(np.asarray(t) > T + TIME_EPS):
        raise ValueError(f"{what} must not exceed {T}")


def b_tilde(t, T: float, params: VasicekParams):
    """Rate loading ``(1 - exp(-a2 (T - t))) / a2`` of the Vasicek bond."""
    _check_order(t, T)
    tau = np.maximum(T - np.asarray(t, dtype=float), 0.0)
    return -np.expm1(-params.a2 * tau) / params.a2


def a_tilde(t, T: float, params: VasicekParams, quad: QuadratureConfig = DEFAULT_QUAD):
    """Log-level ``-int_t^T [a1 B(u,T) - Sr^2 B(u,T)^2 / 2] du``; broadcasts over ``t``."""
    _check_order(t, T)
    t = np.asarray(t, dtype=float)
    span = np.maximum(T - t, 0.0)

    def g(s):
        u = t + np.multiply.outer(s, span)
        bt = -np.expm1(-params.a2 * (T - u)) / params.a2
        return -(params.a1 * bt - 0.5 * params.Sr**2 * bt**2) * span

    return simpson(g, 0.0, 1.0, quad)


def zcb_price(r, t, T: float, params: VasicekParams, quad: QuadratureConfig = DEFAULT_QUAD):
    """Default-free discount bond ``Z(r, t; T)``."""
    _check_order(t, T)
    return np.exp(a_tilde(t, T, params, quad) - b_tilde(t, T, params) * np.asarray(r, dtype=float))


def phi(r, t, i: int, spec: ModelSpec, quad: QuadratureConfig = DEFAULT_QUAD):
    """Present value of everything still promised after ``T_i`` (interval index ``i``).

    ``sum_{k > i} C_k Z(r, t; T_k) + F Z(r, t; T_N)``.
    """
    s = spec.schedule
    if np.any(np.asarray(t) < -TIME_EPS) or np.any(np.asarray(t) > s.maturity + TIME_EPS):
        raise ValueError(f"t outside [0, {s.maturity}]")
    if not 0 <= i < s.n:
        raise ValueError(f"interval index {i} outside [0, {s.n - 1}]")
    total = s.face * zcb_price(r, t, s.maturity, spec.vasicek, quad)
    for T_k, C_k in zip(s.dates[i:], s.coupons[i:]):
        if C_k:
            total = total + C_k * zcb_price(r, t, T_k, spec.vasicek, quad)
    return total


def sigma_sq(u, T: float, vasicek: VasicekParams, firm: FirmDynamics):
    """Instantaneous variance of the forward firm value ``V / Z(., T)``."""
    bt = b_tilde(u, T, vasicek)
    return firm.SV**2 + 2.0 * firm.rho * firm.SV * vasicek.Sr * bt + (vasicek.Sr * bt) ** 2


def integrated_variance(t: float, end, T: float, vasicek, firm, quad=DEFAULT_QUAD):
    """``int_t^end sigma^2(u; T) du``; ``end`` may be an array."""
    end = np.asarray(end, dtype=float)
    _check_order(end, T, "end")
    span = end - t
    if np.any(span < -TIME_EPS):
        raise ValueError("integration end precedes start")

    def g(s):
        u = t + np.multiply.outer(s, span)
        return sigma_sq(np.minimum(u, T), T, vasicek, firm) * span

    return simpson(g, 0.0, 1.0, quad)


def d_plus_minus(x, t: float, T: float, vasicek, firm, quad=DEFAULT_QUAD, maturity=None):
    """``d+`` and ``d-`` for moneyness ``x`` over ``[t, T]``.

    ``maturity`` is the discount bond whose loading enters the variance; it
    defaults to ``T``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("moneyness must be positive")
    if not t < T:
        raise ValueError(f"need t < T, got t = {t}, T = {T}")
    mat = T if maturity is None else maturity
    v = integrated_variance(t, T, mat, vasicek, firm, quad)
    if not v > 0:
        raise ValueError("integrated variance vanished")
    sd = math.sqrt(v)
    core = np.log(x) - firm.b * (T - t)
    return (core + 0.5 * v) / sd, (core - 0.5 * v) / sd


def norm_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class SourceVariant:
    """How the unexpected-default term of the last-interval formula is read.

    ``delta_in_strike``: moneyness of the recovery claims is ``delta x / K``
    (True) or ``x / K``.  ``decay``: the asset leg is discounted by the
    payout over ``[t, T_N]`` (``"maturity"``) or over ``[t, tau]``
    (``"default_time"``).
    """

    delta_in_strike: bool = True
    decay: str = "default_time"

    def __post_init__(self):
        if self.decay not in ("maturity", "default_time"):
            raise ValueError(f"unknown decay {self.decay!r}")


SOURCE_VARIANTS = {
    "printed": SourceVariant(True, "maturity"),
    "corrected": SourceVariant(True, "default_time"),
    "printed_no_delta": SourceVariant(False, "maturity"),
    "corrected_no_delta": SourceVariant(False, "default_time"),
}


def _leg_probs(y, t, tau, T, vasicek, firm, quad):
    """``N(d-)`` and ``N(-d+)`` at moneyness ``y`` for horizons ``tau`` (1-D array).

    Returns arrays shaped ``tau.shape + y.shape``; a zero horizon takes the
    step-function limit.
    """
    tau = np.asarray(tau, dtype=float)
    v = np.atleast_1d(integrated_variance(t, tau, T, vasicek, firm, quad))
    ly = np.log(y)
    out_m = np.empty(tau.shape + y.shape)
    out_p = np.empty_like(out_m)
    for j, (tj, vj) in enumerate(zip(tau, v)):
        if vj <= 0:
            out_m[j] = np.where(ly > 0, 1.0, np.where(ly == 0, 0.5, 0.0))
            out_p[j] = np.where(ly < 0, 1.0, np.where(ly == 0, 0.5, 0.0))
            continue
        sd = math.sqrt(vj)
        core = ly - firm.b * (tj - t)
        out_m[j] = norm_cdf((core - 0.5 * vj) / sd)
        out_p[j] = norm_cdf(-(core + 0.5 * vj) / sd)
    return out_m, out_p


def analytic_last_interval(
    V,
    r,
    t: float,
    spec: ModelSpec,
    quad: QuadratureConfig = TAU_QUAD,
    variant: str | SourceVariant = "corrected",
):
    """Closed-form price on ``[T_{N-1}, T_N)``.

    ``B = Z(r, t; T_N) u(V / Z, t)``.  The recovery-stream integral over the
    default time is taken by Simpson in ``s`` with ``tau = t + (T_N - t) s^2``,
    which smooths the ``1/sqrt(tau - t)`` behaviour of ``d+-`` near ``tau = t``.
    """
    if isinstance(variant, str):
        variant = SOURCE_VARIANTS[variant]
    sched, firm, vas = spec.schedule, spec.firm, spec.vasicek
    T = sched.maturity
    start = sched.boundaries[-2]
    if not start - TIME_EPS <= t < T:
        raise ValueError(f"t = {t} outside the last interval [{start}, {T})")
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0):
        raise ValueError("firm value must be positive")
    r = np.asarray(r, dtype=float)
    V, r = np.broadcast_arrays(V, r)
    K = sched.face + sched.coupons[-1]
    lam = sched.intensities[-1]
    delta = firm.delta
    Z = zcb_price(r, t, T, vas)
    x = V / Z
    horizon = T - t

    dplus, dminus = d_plus_minus(x / K, t, T, vas, firm)
    u = math.exp(-lam * horizon) * (
        K * norm_cdf(dminus) + delta * x * math.exp(-firm.b * horizon) * norm_cdf(-dplus)
    )

    if lam > 0:
        y = (delta * x / K) if variant.delta_in_strike else (x / K)

        def g(s):
            tau = t + horizon * s**2
            nm, np_ = _leg_probs(y, t, tau, T, vas, firm, DEFAULT_QUAD)
            if variant.decay == "maturity":
                decay = np.full(tau.shape, math.exp(-firm.b * horizon))
            else:
                decay = np.exp(-firm.b * (tau - t))
            shape = (-1,) + (1,) * y.ndim
            jac = (2.0 * horizon * s).reshape(shape)
            disc = np.exp(-lam * (tau - t)).reshape(shape)
            bracket = K * nm + delta * x * decay.reshape(shape) * np_
            return jac * disc * bracket

        u = u + lam * simpson(g, 0.0, 1.0, quad)
    return Z * u
