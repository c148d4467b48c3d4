"""Flat ``key = value`` run configuration.

One entry per line, ``#`` starts a comment, sequences are comma separated.
Numbers may be written as ``ln(2)``.  Keys left out take the values of the
reference example, so an empty file is a valid configuration.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from discobond.analytic import SOURCE_VARIANTS
from discobond.errors import ConfigError
from discobond.fd import GridSpec, printed_mu_r_grid, reference_grid
from discobond.model import (
    CouponSchedule,
    FirmDynamics,
    ModelSpec,
    VasicekParams,
    reference_model,
)

OUTPUTS = ("price", "stability", "figures")
TABLE_V = (5.00, 9.11, 10.06, 11.13, 12.30, 13.60, 20.30, 30.20, 33.40)
TABLE_R = (0.02, 0.04, 0.06, 0.08)

SCALARS = ("a1", "a2", "Sr", "SV", "b", "rho", "delta", "face",
           "x_min", "x_max", "dx", "r_min", "r_max", "dr", "dt")
SEQUENCES = ("dates", "coupons", "intensities", "price_V", "price_r", "price_t")
WORDS = ("mu_r", "eq26", "side")
KEYS = SCALARS[:8] + SEQUENCES[:3] + SCALARS[8:] + WORDS[:2] + ("outputs",) + SEQUENCES[3:] + WORDS[2:]


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec = field(default_factory=reference_model)
    grid: GridSpec = field(default_factory=reference_grid)
    outputs: tuple[str, ...] = OUTPUTS
    mu_r: str = "recomputed"
    eq26: str = "corrected"
    price_V: tuple[float, ...] = TABLE_V
    price_r: tuple[float, ...] = TABLE_R
    price_t: tuple[float, ...] = (0.0,)
    side: str = "after"

    def effective_grid(self) -> GridSpec:
        """The grid actually solved on, with the ``mu_r`` variant applied."""
        if self.mu_r == "printed":
            return printed_mu_r_grid(self.grid, self.model.vasicek.Sr)
        return self.grid

    def with_variant(self, name: str, value: str) -> "RunConfig":
        raw = self.as_dict()
        if name not in ("mu_r", "eq26"):
            raise ConfigError(f"unknown variant {name!r}")
        raw[name] = value
        return _build(raw, {})

    def as_dict(self) -> dict:
        m, g = self.model, self.grid
        s = m.schedule
        return {
            "a1": m.vasicek.a1, "a2": m.vasicek.a2, "Sr": m.vasicek.Sr,
            "SV": m.firm.SV, "b": m.firm.b, "rho": m.firm.rho, "delta": m.firm.delta,
            "face": s.face, "dates": s.dates, "coupons": s.coupons, "intensities": s.intensities,
            "x_min": g.x_min, "x_max": g.x_max, "dx": g.dx,
            "r_min": g.r_min, "r_max": g.r_max, "dr": g.dr, "dt": g.dt_target,
            "mu_r": self.mu_r, "eq26": self.eq26, "outputs": self.outputs,
            "price_V": self.price_V, "price_r": self.price_r, "price_t": self.price_t,
            "side": self.side,
        }


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return repr(float(v))


def dump(config: RunConfig) -> str:
    raw = config.as_dict()
    lines = ["# discobond run configuration"]
    lines += [f"{k} = {_fmt(raw[k])}" for k in KEYS]
    return "\n".join(lines) + "\n"


_LN = re.compile(r"^ln\((.+)\)$")


def _number(text: str, line: int, key: str) -> float:
    t = text.strip()
    m = _LN.match(t)
    try:
        if m:
            return math.log(float(m.group(1)))
        return float(t)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {t!r} as a number", line) from None


def parse(text: str) -> RunConfig:
    raw: dict = {}
    where: dict[str, int] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", n)
        key, value = (p.strip() for p in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", n)
        if key in where:
            raise ConfigError(f"{key} given twice (first on line {where[key]})", n)
        where[key] = n
        if key in SCALARS:
            raw[key] = _number(value, n, key)
        elif key in SEQUENCES:
            items = [v for v in value.split(",") if v.strip()]
            raw[key] = tuple(_number(v, n, key) for v in items)
        elif key == "outputs":
            raw[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            raw[key] = value
    return _build(raw, where)


def _blame(message: str, where: dict[str, int]):
    for key in sorted(where, key=len, reverse=True):
        if re.search(rf"(?<![A-Za-z_]){re.escape(key)}(?![A-Za-z_])", message):
            return where[key]
    return None


def _build(raw: dict, where: dict[str, int]) -> RunConfig:
    base = RunConfig().as_dict()
    base.update(raw)
    v = base
    try:
        model = ModelSpec(
            VasicekParams(v["a1"], v["a2"], v["Sr"]),
            FirmDynamics(v["SV"], v["b"], v["rho"], v["delta"]),
            CouponSchedule(v["dates"], v["coupons"], v["face"], v["intensities"]),
        )
        grid = GridSpec(v["x_min"], v["x_max"], v["dx"], v["r_min"], v["r_max"], v["dr"], v["dt"])
    except ValueError as exc:
        raise ConfigError(str(exc), _blame(str(exc), where)) from None
    if v["mu_r"] not in ("printed", "recomputed"):
        raise ConfigError("mu_r must be 'printed' or 'recomputed'", where.get("mu_r"))
    if v["eq26"] not in SOURCE_VARIANTS:
        raise ConfigError(f"eq26 must be one of {sorted(SOURCE_VARIANTS)}", where.get("eq26"))
    if v["side"] not in ("before", "after"):
        raise ConfigError("side must be 'before' or 'after'", where.get("side"))
    bad = [o for o in v["outputs"] if o not in OUTPUTS]
    if bad:
        raise ConfigError(f"unknown outputs {bad}", where.get("outputs"))
    for key in ("price_V", "price_r", "price_t"):
        if not v[key]:
            raise ConfigError(f"{key} is empty", where.get(key))
    return RunConfig(
        model=model, grid=grid, outputs=tuple(v["outputs"]), mu_r=v["mu_r"], eq26=v["eq26"],
        price_V=tuple(v["price_V"]), price_r=tuple(v["price_r"]), price_t=tuple(v["price_t"]),
        side=v["side"],
    )
