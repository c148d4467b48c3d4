"""Explicit finite differences in ``x = ln V`` and the short rate ``r``.

Each coupon interval is stepped backward from its right end with forward
Euler in time.  Three stencils for the cross derivative are available: the
four-corner central one for ``rho = 0``, a forward one for ``0 < rho < 1/2``
and a forward/backward one for ``-1/2 < rho < 0``; each has non-negative
weights under its own stability conditions (see :mod:`discobond.stability`).

Edges use ghost nodes filled by linear extrapolation (zero second
derivative), or wrap around with ``boundary="periodic"``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from discobond import analytic
from discobond.errors import (
    AmbiguousTime,
    NonFiniteValue,
    OutOfDomain,
    StabilityViolation,
    UnsupportedCorrelation,
)
from discobond.model import ModelSpec, interface_condition, terminal_payoff

GRID_TOL = 1e-9


class SchemeKind(enum.Enum):
    CENTRAL_MIXED = "central"
    FORWARD_MIXED = "forward"
    FORWARD_BACKWARD_MIXED = "forward_backward"


def select_scheme(rho: float) -> SchemeKind:
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [-1, 1], got {rho}")
    if rho == 0:
        return SchemeKind.CENTRAL_MIXED
    if 0 < rho < 0.5:
        return SchemeKind.FORWARD_MIXED
    if -0.5 < rho < 0:
        return SchemeKind.FORWARD_BACKWARD_MIXED
    raise UnsupportedCorrelation(f"no stable explicit stencil is known for rho = {rho}")


def _count(lo, hi, step, what):
    k = (hi - lo) / step
    n = round(k)
    if n < 1 or abs(k - n) > GRID_TOL * max(1.0, abs(k)):
        raise ValueError(f"({what}_max - {what}_min) / d{what} = {k} is not a positive integer")
    return n


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    dx: float
    r_min: float
    r_max: float
    dr: float
    dt_target: float

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if not self.r_min < self.r_max:
            raise ValueError("r_min must be below r_max")
        if not (self.dx > 0 and self.dr > 0 and self.dt_target > 0):
            raise ValueError("dx, dr and dt_target must be positive")
        _count(self.x_min, self.x_max, self.dx, "x")
        _count(self.r_min, self.r_max, self.dr, "r")

    @property
    def nx(self) -> int:
        return _count(self.x_min, self.x_max, self.dx, "x") + 1

    @property
    def nr(self) -> int:
        return _count(self.r_min, self.r_max, self.dr, "r") + 1

    @property
    def x_nodes(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def r_nodes(self) -> np.ndarray:
        return self.r_min + self.dr * np.arange(self.nr)

    def steps(self, length: float) -> tuple[int, float]:
        """Number of steps and the step that lands exactly on the interval end."""
        n = max(1, math.ceil(length / self.dt_target - 1e-9))
        return n, length / n

    def replace(self, **changes) -> "GridSpec":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return GridSpec(**kw)


REFERENCE_MU_R = 0.9625


def printed_mu_r_grid(grid: GridSpec, Sr: float, mu_r: float = REFERENCE_MU_R) -> GridSpec:
    """Same grid with ``dr`` chosen so that ``Sr^2 dt / dr^2 == mu_r``.

    The upper rate bound moves to the nearest whole number of steps.
    """
    dr = Sr * math.sqrt(grid.dt_target / mu_r)
    n = max(1, round((grid.r_max - grid.r_min) / dr))
    return grid.replace(dr=dr, r_max=grid.r_min + n * dr)


def reference_grid(spec: ModelSpec | None = None, mu_r: str = "recomputed") -> GridSpec:
    """Lattice of the reference example: ``dt = 0.005``, ``dx = ln 2`` on ``V in [0.5, 64]``.

    ``mu_r="recomputed"`` keeps ``dr = 0.02`` on ``[0, 0.2]``; ``"printed"``
    uses :func:`printed_mu_r_grid` to hit ``mu_r = 0.9625`` exactly.
    """
    base = GridSpec(
        x_min=math.log(0.5), x_max=math.log(64.0), dx=math.log(2.0),
        r_min=0.0, r_max=0.2, dr=0.02, dt_target=0.005,
    )
    if mu_r == "recomputed":
        return base
    if mu_r != "printed":
        raise ValueError(f"mu_r variant must be 'printed' or 'recomputed', got {mu_r!r}")
    return printed_mu_r_grid(base, 0.077 if spec is None else spec.vasicek.Sr)


# (dl, dm) offsets, dl along x and dm along r
Stencil = dict[tuple[int, int], np.ndarray]


def stencil(scheme: SchemeKind, mu_x, mu_r, rho, adv_x, adv_r) -> Stencil:
    """Weights on level-n values, before division by ``1 + dt (r + lambda)``.

    ``adv_x = dt (r - b - Sx^2/2) / (2 dx)`` and ``adv_r = dt a_r / (2 dr)``,
    both arrays over the rate nodes.  The weights of every scheme sum to one.
    """
    s = math.sqrt(mu_x * mu_r)
    one = np.ones_like(np.asarray(adv_x, dtype=float))
    if scheme is SchemeKind.CENTRAL_MIXED:
        q = 0.25 * rho * s
        return {
            (0, 0): (1 - mu_x - mu_r) * one,
            (1, 0): 0.5 * mu_x + adv_x,
            (-1, 0): 0.5 * mu_x - adv_x,
            (0, 1): 0.5 * mu_r + adv_r,
            (0, -1): 0.5 * mu_r - adv_r,
            (1, 1): q * one,
            (1, -1): -q * one,
            (-1, 1): -q * one,
            (-1, -1): q * one,
        }
    c = rho * s
    if scheme is SchemeKind.FORWARD_MIXED:
        return {
            (0, 0): (1 - mu_x - mu_r + c) * one,
            (1, 0): 0.5 * mu_x - c + adv_x,
            (-1, 0): 0.5 * mu_x - adv_x,
            (0, 1): 0.5 * mu_r - c + adv_r,
            (0, -1): 0.5 * mu_r - adv_r,
            (1, 1): c * one,
        }
    if scheme is SchemeKind.FORWARD_BACKWARD_MIXED:
        return {
            (0, 0): (1 - mu_x - mu_r - c) * one,
            (1, 0): 0.5 * mu_x + adv_x,
            (-1, 0): 0.5 * mu_x + c - adv_x,
            (0, 1): 0.5 * mu_r + c + adv_r,
            (0, -1): 0.5 * mu_r - adv_r,
            (-1, 1): -c * one,
        }
    raise TypeError(f"unknown scheme {scheme!r}")


def pad(values: np.ndarray, boundary: str = "linear") -> np.ndarray:
    """One layer of ghost nodes on every side."""
    if boundary == "periodic":
        return np.pad(values, 1, mode="wrap")
    if boundary != "linear":
        raise ValueError(f"unknown boundary {boundary!r}")
    if min(values.shape) < 2:
        raise ValueError("linear extrapolation needs at least two nodes per axis")
    p = np.empty((values.shape[0] + 2, values.shape[1] + 2))
    p[1:-1, 1:-1] = values
    p[0, 1:-1] = 2 * values[0] - values[1]
    p[-1, 1:-1] = 2 * values[-1] - values[-2]
    p[:, 0] = 2 * p[:, 1] - p[:, 2]
    p[:, -1] = 2 * p[:, -2] - p[:, -3]
    return p


def apply_stencil(values: np.ndarray, weights: Stencil, boundary: str = "linear") -> np.ndarray:
    p = pad(values, boundary)
    nx, nr = values.shape
    out = np.zeros_like(values, dtype=float)
    for (dl, dm), w in weights.items():
        out += w * p[1 + dl : 1 + dl + nx, 1 + dm : 1 + dm + nr]
    return out


class IntervalStepper:
    """Backward steps on one coupon interval with a fixed ``dt``."""

    def __init__(self, spec: ModelSpec, grid: GridSpec, interval: int, scheme: SchemeKind,
                 dt: float, boundary: str = "linear"):
        self.spec = spec
        self.grid = grid
        self.interval = interval
        self.scheme = scheme
        self.dt = dt
        self.boundary = boundary
        firm, vas = spec.firm, spec.vasicek
        r = grid.r_nodes
        self.r = r
        self.x = grid.x_nodes
        self.lam = spec.schedule.intensities[interval]
        self.mu_x = firm.SV**2 * dt / grid.dx**2
        self.mu_r = vas.Sr**2 * dt / grid.dr**2
        adv_x = dt * (r - firm.b - 0.5 * firm.SV**2) / (2 * grid.dx)
        adv_r = dt * vas.drift(r) / (2 * grid.dr)
        self.weights = stencil(scheme, self.mu_x, self.mu_r, firm.rho, adv_x, adv_r)
        self.denom = 1.0 + dt * (r + self.lam)
        self.recovery = firm.delta * np.exp(self.x)[:, None]

    def source(self, phi_row: np.ndarray) -> np.ndarray:
        """``dt * lambda * min(delta e^x, phi)`` for one level; ``phi_row`` runs over r."""
        return self.dt * self.lam * np.minimum(self.recovery, phi_row[None, :])

    def step(self, values: np.ndarray, phi_row: np.ndarray | None = None) -> np.ndarray:
        out = apply_stencil(values, self.weights, self.boundary)
        if self.lam and phi_row is not None:
            out = out + self.source(phi_row)
        out = out / self.denom
        if not np.all(np.isfinite(out)):
            raise NonFiniteValue("explicit step produced non-finite values")
        return out


def _require_pass(report):
    if report.verdict != "PASS":
        failing = [c.name for c in report.conditions if not c.satisfied]
        what = ", ".join(failing) if failing else report.verdict
        raise StabilityViolation(
            f"interval {report.interval} ({report.scheme.value}): {what} "
            f"(mu_x={report.mu_x:.4g}, mu_r={report.mu_r:.4g}, dt={report.dt:.4g})",
            report,
        )


def step(slice_n, t_n: float, interval: int, spec: ModelSpec, grid: GridSpec,
         scheme: SchemeKind | None = None, boundary: str = "linear"):
    """One backward step from ``t_n`` to ``t_n - dt`` on ``interval``.

    ``dt`` is the interval's actual step (see :meth:`GridSpec.steps`).
    """
    from discobond.stability import check

    scheme = scheme or select_scheme(spec.firm.rho)
    report = check(grid, spec, interval)
    _require_pass(report)
    values = np.asarray(slice_n, dtype=float)
    if values.shape != (grid.nx, grid.nr):
        raise ValueError(f"slice has shape {values.shape}, grid is {(grid.nx, grid.nr)}")
    bounds = spec.schedule.boundaries
    _, dt = grid.steps(bounds[interval + 1] - bounds[interval])
    st = IntervalStepper(spec, grid, interval, scheme, dt, boundary)
    phi_row = analytic.phi(grid.r_nodes, t_n, interval, spec) if st.lam else None
    return st.step(values, phi_row)


@dataclass(frozen=True, eq=False)
class PriceSurface:
    """Solved values ``B(x, r, t)``.

    ``times`` ascend; each interior coupon date appears twice, first with the
    value just before the payment (``interval_index == i``) and then just
    after it (``i + 1``).
    """

    x_nodes: np.ndarray
    r_nodes: np.ndarray
    times: np.ndarray
    values: np.ndarray
    interval_index: np.ndarray
    spec: ModelSpec | None = None

    def __post_init__(self):
        nt = len(self.times)
        if self.values.shape != (nt, len(self.x_nodes), len(self.r_nodes)):
            raise ValueError("values shape does not match the nodes")
        if len(self.interval_index) != nt:
            raise ValueError("interval_index must have one entry per time")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteValue("surface holds non-finite values")

    @property
    def coupon_dates(self) -> tuple[float, ...]:
        if self.spec is None:
            return ()
        return self.spec.schedule.dates[:-1]

    def _time_index(self, t: float, side: str | None) -> int:
        times = self.times
        if not times[0] - analytic.TIME_EPS <= t <= times[-1] + analytic.TIME_EPS:
            raise OutOfDomain(f"t = {t} outside [{times[0]}, {times[-1]}]")
        for k, T in enumerate(self.coupon_dates):
            if abs(t - T) <= 1e-9:
                if side not in ("before", "after"):
                    raise AmbiguousTime(f"t = {t} is a coupon date; pass side='before' or 'after'")
                hits = np.flatnonzero(np.abs(times - T) <= 1e-9)
                want = k if side == "before" else k + 1
                for j in hits:
                    if self.interval_index[j] == want:
                        return int(j)
                raise OutOfDomain(f"no stored slice on the {side} side of {T}")
        return int(np.argmin(np.abs(times - t)))

    def slice_at(self, t: float, side: str | None = None) -> np.ndarray:
        return self.values[self._time_index(t, side)]

    def query(self, V, r, t: float, side: str | None = None):
        """Bilinear interpolation in ``(ln V, r)`` on the nearest stored time."""
        V = np.asarray(V, dtype=float)
        r = np.asarray(r, dtype=float)
        if np.any(V <= 0):
            raise OutOfDomain("firm value must be positive")
        if self.spec is not None and abs(t - self.spec.schedule.maturity) <= 1e-9:
            # the maturity slice is the payoff itself; evaluate it off-node too
            self._check_hull(np.log(V), r)
            return terminal_payoff(np.broadcast_to(V, np.broadcast(V, r).shape), self.spec)
        return bilinear(self.x_nodes, self.r_nodes, self.slice_at(t, side), np.log(V), r)

    def _check_hull(self, x, r):
        eps = 1e-12
        if np.any(x < self.x_nodes[0] - eps) or np.any(x > self.x_nodes[-1] + eps):
            raise OutOfDomain("ln V outside the grid")
        if np.any(r < self.r_nodes[0] - eps) or np.any(r > self.r_nodes[-1] + eps):
            raise OutOfDomain("r outside the grid")

    def coupon_jump(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Slices just before and just after coupon date ``k`` (0-based)."""
        T = self.coupon_dates[k]
        return self.slice_at(T, "before"), self.slice_at(T, "after")


def bilinear(xs, rs, table, x, r):
    x, r = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(r, dtype=float))
    eps = 1e-12
    if np.any(x < xs[0] - eps) or np.any(x > xs[-1] + eps):
        raise OutOfDomain("ln V outside the grid")
    if np.any(r < rs[0] - eps) or np.any(r > rs[-1] + eps):
        raise OutOfDomain("r outside the grid")
    i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
    j = np.clip(np.searchsorted(rs, r, side="right") - 1, 0, len(rs) - 2)
    wx = np.clip((x - xs[i]) / (xs[i + 1] - xs[i]), 0.0, 1.0)
    wr = np.clip((r - rs[j]) / (rs[j + 1] - rs[j]), 0.0, 1.0)
    out = (
        (1 - wx) * (1 - wr) * table[i, j]
        + wx * (1 - wr) * table[i + 1, j]
        + (1 - wx) * wr * table[i, j + 1]
        + wx * wr * table[i + 1, j + 1]
    )
    return out if out.ndim else float(out)


def query(surface: PriceSurface, V, r, t: float, side: str | None = None):
    return surface.query(V, r, t, side)


def phi_table(spec: ModelSpec, interval: int, r_nodes, times) -> np.ndarray:
    """``Phi_i(r_m, t_n)`` for all listed times, shape ``(len(times), len(r_nodes))``."""
    times = np.asarray(times, dtype=float)[:, None]
    return analytic.phi(np.asarray(r_nodes)[None, :], times, interval, spec)


def solve(spec: ModelSpec, grid: GridSpec, scheme: SchemeKind | None = None,
          boundary: str = "linear", enforce_stability: bool = True) -> PriceSurface:
    """Backward induction from maturity to ``t = 0``.

    Raises :class:`StabilityViolation` naming the failing condition unless
    ``enforce_stability`` is off.
    """
    from discobond.stability import check

    scheme = scheme or select_scheme(spec.firm.rho)
    sched = spec.schedule
    bounds = sched.boundaries
    x, r = grid.x_nodes, grid.r_nodes
    V = np.exp(x)[:, None] * np.ones((1, len(r)))

    if enforce_stability:
        for i in range(sched.n):
            _require_pass(check(grid, spec, i))

    times: list[float] = [sched.maturity]
    slices = [terminal_payoff(V, spec)]
    owner = [sched.n - 1]
    current = slices[0]
    for i in range(sched.n - 1, -1, -1):
        if i < sched.n - 1:
            current = interface_condition(V, current, sched.coupons[i], spec.firm.delta)
            times.append(bounds[i + 1])
            slices.append(current)
            owner.append(i)
        n, dt = grid.steps(bounds[i + 1] - bounds[i])
        st = IntervalStepper(spec, grid, i, scheme, dt, boundary)
        levels = bounds[i + 1] - dt * np.arange(n)
        levels[0] = bounds[i + 1]
        phis = phi_table(spec, i, r, levels) if st.lam else None
        for k in range(n):
            current = st.step(current, None if phis is None else phis[k])
            t_next = bounds[i] if k == n - 1 else levels[k] - dt
            times.append(t_next)
            slices.append(current)
            owner.append(i)
    order = slice(None, None, -1)
    return PriceSurface(
        x_nodes=x,
        r_nodes=r,
        times=np.array(times[order]),
        values=np.array(slices[order]),
        interval_index=np.array(owner[order]),
        spec=spec,
    )
