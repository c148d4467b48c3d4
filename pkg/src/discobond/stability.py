"""Stability conditions for the three explicit stencils.

Each condition is a sufficient condition for the stencil weights to be
non-negative, which makes one step a contraction in the max norm.  The
rate-dependent ones are checked at every rate node and the binding node is
reported.  The default intensity never enters: it only strengthens the
``1 / (1 + dt (r + lambda))`` damping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from discobond.errors import NoFeasibleDt, UnsupportedCorrelation, WrongScheme
from discobond.fd import GridSpec, SchemeKind, select_scheme
from discobond.model import ModelSpec

LAMBDA_NOTE = "default intensity does not enter any condition"


@dataclass(frozen=True)
class Condition:
    name: str
    attained: float
    bound: float
    strict: bool
    worst_r: float | None = None

    @property
    def margin(self) -> float:
        return self.bound - self.attained

    @property
    def satisfied(self) -> bool:
        m = self.margin
        return bool(m > 0) if self.strict else bool(m >= 0)


@dataclass(frozen=True)
class StabilityReport:
    scheme: SchemeKind | None
    verdict: str
    conditions: tuple[Condition, ...]
    mu_x: float
    mu_r: float
    dt: float
    interval: int
    notes: tuple[str, ...] = field(default=(LAMBDA_NOTE,))

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def advection_sizes(grid: GridSpec, spec: ModelSpec):
    """Per-rate-node ``dx/(2Sx^2) |r - b - Sx^2/2|`` and ``dr/(2Sr^2) |a_r|``."""
    firm, vas = spec.firm, spec.vasicek
    r = grid.r_nodes
    ax = grid.dx / (2 * firm.SV**2) * np.abs(r - firm.b - 0.5 * firm.SV**2)
    drift = np.abs(vas.drift(r))
    if vas.Sr > 0:
        ar = grid.dr / (2 * vas.Sr**2) * drift
    else:
        ar = np.where(drift == 0, 0.0, np.inf)
    return ax, ar


def _worst(sizes, r_nodes):
    k = int(np.argmax(sizes))
    return float(sizes[k]), float(r_nodes[k])


def _ratio(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return math.sqrt(a / b)


def evaluate(scheme: SchemeKind, rho, mu_x, mu_r, adv_x, adv_r, r_nodes) -> tuple[Condition, ...]:
    """Conditions for ``scheme`` from mesh ratios and per-node advection sizes."""
    ax, rx = _worst(np.asarray(adv_x, dtype=float), r_nodes)
    ar, rr = _worst(np.asarray(adv_r, dtype=float), r_nodes)
    if scheme is SchemeKind.CENTRAL_MIXED:
        return (
            Condition("diffusion_sum", mu_x + mu_r, 1.0, True),
            Condition("advection_x", ax, 0.5, True, rx),
            Condition("advection_r", ar, 0.5, True, rr),
        )
    if scheme is SchemeKind.FORWARD_MIXED:
        sign = 1.0
    elif scheme is SchemeKind.FORWARD_BACKWARD_MIXED:
        sign = -1.0
    else:
        raise TypeError(f"unknown scheme {scheme!r}")
    cross = sign * rho * math.sqrt(mu_x * mu_r)
    kx = sign * rho * _ratio(mu_r, mu_x)
    kr = sign * rho * _ratio(mu_x, mu_r)
    return (
        Condition("diffusion_sum", mu_x + mu_r - cross, 1.0, False),
        Condition("cross_ratio_x", kx, 0.5, True),
        Condition("advection_x", ax, 0.5 - kx, True, rx),
        Condition("cross_ratio_r", kr, 0.5, True),
        Condition("advection_r", ar, 0.5 - kr, True, rr),
    )


def _report(grid, spec, interval, scheme, dt=None):
    bounds = spec.schedule.boundaries
    if not 0 <= interval < spec.schedule.n:
        raise ValueError(f"interval {interval} outside [0, {spec.schedule.n - 1}]")
    if dt is None:
        _, dt = grid.steps(bounds[interval + 1] - bounds[interval])
    mu_x = spec.firm.SV**2 * dt / grid.dx**2
    mu_r = spec.vasicek.Sr**2 * dt / grid.dr**2
    ax, ar = advection_sizes(grid, spec)
    conds = evaluate(scheme, spec.firm.rho, mu_x, mu_r, ax, ar, grid.r_nodes)
    verdict = "PASS" if all(c.satisfied for c in conds) else "FAIL"
    return StabilityReport(scheme, verdict, conds, mu_x, mu_r, dt, interval)


def check_central(grid: GridSpec, spec: ModelSpec, interval: int = 0, dt=None) -> StabilityReport:
    if spec.firm.rho != 0:
        raise WrongScheme(f"central stencil needs rho = 0, got {spec.firm.rho}")
    return _report(grid, spec, interval, SchemeKind.CENTRAL_MIXED, dt)


def check_forward(grid: GridSpec, spec: ModelSpec, interval: int = 0, dt=None) -> StabilityReport:
    if not 0 < spec.firm.rho < 0.5:
        raise WrongScheme(f"forward stencil needs 0 < rho < 1/2, got {spec.firm.rho}")
    return _report(grid, spec, interval, SchemeKind.FORWARD_MIXED, dt)


def check_backward(grid: GridSpec, spec: ModelSpec, interval: int = 0, dt=None) -> StabilityReport:
    if not -0.5 < spec.firm.rho < 0:
        raise WrongScheme(f"forward/backward stencil needs -1/2 < rho < 0, got {spec.firm.rho}")
    return _report(grid, spec, interval, SchemeKind.FORWARD_BACKWARD_MIXED, dt)


_CHECKS = {
    SchemeKind.CENTRAL_MIXED: check_central,
    SchemeKind.FORWARD_MIXED: check_forward,
    SchemeKind.FORWARD_BACKWARD_MIXED: check_backward,
}


def check(grid: GridSpec, spec: ModelSpec, interval: int = 0, dt=None) -> StabilityReport:
    """Report for the stencil matching ``rho``; ``UNSUPPORTED`` when none does."""
    try:
        scheme = select_scheme(spec.firm.rho)
    except UnsupportedCorrelation:
        bounds = spec.schedule.boundaries
        if dt is None:
            _, dt = grid.steps(bounds[interval + 1] - bounds[interval])
        return StabilityReport(
            None, "UNSUPPORTED", (),
            spec.firm.SV**2 * dt / grid.dx**2, spec.vasicek.Sr**2 * dt / grid.dr**2,
            dt, interval,
            notes=(f"no stability result for |rho| >= 1/2 (rho = {spec.firm.rho})",),
        )
    return _CHECKS[scheme](grid, spec, interval, dt)


def check_all(grid: GridSpec, spec: ModelSpec) -> list[StabilityReport]:
    return [check(grid, spec, i) for i in range(spec.schedule.n)]


DT_FLOOR = 1e-7


def _comfortable(report: StabilityReport, safety: float) -> bool:
    return report.passed and all(c.margin >= (1 - safety) * c.bound for c in report.conditions)


def suggest_dt(grid: GridSpec, spec: ModelSpec, safety: float = 0.9) -> float:
    """Largest ``dt`` target keeping every interval at ``attained <= safety * bound``.

    ``grid.dt_target`` is ignored.  Only the diffusion sum depends on ``dt``
    (linearly), so each interval needs at most one estimate and a short walk.
    """
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    select_scheme(spec.firm.rho)
    bounds = spec.schedule.boundaries
    best = math.inf
    for i in range(spec.schedule.n):
        length = bounds[i + 1] - bounds[i]
        probe = check(grid, spec, i, dt=length)
        per_dt = probe.condition("diffusion_sum").attained / length
        others_ok = all(
            c.margin >= (1 - safety) * c.bound
            for c in probe.conditions if c.name != "diffusion_sum"
        )
        if not others_ok:
            raise NoFeasibleDt(
                f"interval {i}: conditions that do not depend on dt fail at safety {safety}"
            )
        n = max(1, math.ceil(length * per_dt / safety)) if per_dt > 0 else 1
        while not _comfortable(check(grid, spec, i, dt=length / n), safety):
            n += 1
            if length / n < DT_FLOOR:
                raise NoFeasibleDt(f"interval {i}: no dt above {DT_FLOOR:g} works")
        if length / n < DT_FLOOR:
            raise NoFeasibleDt(f"interval {i}: no dt above {DT_FLOOR:g} works")
        best = min(best, length / n)
    return best
