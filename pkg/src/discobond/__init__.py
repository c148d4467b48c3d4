"""Defaultable fixed-coupon bond pricing in a two-factor firm value / Vasicek model."""

from discobond.model import (
    CouponSchedule,
    FirmDynamics,
    ModelSpec,
    VasicekParams,
    reference_model,
)
from discobond.fd import GridSpec, PriceSurface, SchemeKind, solve

__all__ = [
    "CouponSchedule",
    "FirmDynamics",
    "GridSpec",
    "ModelSpec",
    "PriceSurface",
    "SchemeKind",
    "VasicekParams",
    "reference_model",
    "solve",
]

__version__ = "0.1.0"
