"""Named equations u_t + div(u v(u)) = A(u)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from .operators import (
    ASpec,
    Burgers,
    ConvolutionKernel,
    DerivativeTerm,
    FractionalLaplacian,
    SQG,
    VSpec,
)

__all__ = ["Preset", "PRESETS", "make_preset", "custom"]


@dataclass(frozen=True)
class Preset:
    id: str
    a: ASpec
    v: VSpec
    dims: tuple[int, ...]
    params: dict = field(default_factory=dict, compare=False, hash=False)


def kdv() -> Preset:
    """u_t + (u^2)_x = u_xxx."""
    return Preset("kdv", ASpec([(1.0, DerivativeTerm((3,)))]), Burgers(1.0), (1,))


def viscous_burgers(alpha: float = 2.0) -> Preset:
    """u_t + (u^2)_x = -(-d_xx)^{alpha/2} u, alpha in [1, 2]."""
    if not 1.0 <= alpha <= 2.0:
        raise ValueError(f"viscous_burgers needs alpha in [1, 2] for well-posedness, got {alpha}")
    return Preset(
        "viscous_burgers",
        ASpec([(1.0, FractionalLaplacian(alpha))]),
        Burgers(1.0),
        (1,),
        {"alpha": alpha},
    )


def kawahara() -> Preset:
    """u_t + (u^2)_x = -u_xxx + u_xxxxx."""
    a = ASpec([(-1.0, DerivativeTerm((3,))), (1.0, DerivativeTerm((5,)))])
    return Preset("kawahara", a, Burgers(1.0), (1,))


def sqg(alpha: float = 2.0, beta: float = 2.0) -> Preset:
    """Dissipative SQG, alpha and beta in [1, 2]."""
    for name, val in (("alpha", alpha), ("beta", beta)):
        if not 1.0 <= val <= 2.0:
            raise ValueError(f"sqg needs {name} in [1, 2], got {val}")
    return Preset(
        "sqg",
        ASpec([(1.0, FractionalLaplacian(alpha))]),
        SQG(beta),
        (2,),
        {"alpha": alpha, "beta": beta},
    )


def aggregation(alpha: float = 2.0, kernel: str = "gaussian") -> Preset:
    """Aggregation with fractional diffusion, alpha in (1, 2].

    The ``exponential`` kernel collapses without enough diffusion and is
    expected to trip the B-flow guard.
    """
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"aggregation needs alpha in (1, 2], got {alpha}")
    return Preset(
        "aggregation",
        ASpec([(1.0, FractionalLaplacian(alpha))]),
        ConvolutionKernel(kernel),
        (2, 3),
        {"alpha": alpha, "kernel": kernel},
    )


PRESETS = {
    "kdv": kdv,
    "viscous_burgers": viscous_burgers,
    "kawahara": kawahara,
    "sqg": sqg,
    "aggregation": aggregation,
}


def make_preset(name: str, **params) -> Preset:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**params)


def custom(a: ASpec, v: VSpec, dims: int) -> Preset:
    if isinstance(v, Burgers):
        for _, t in a.terms:
            if isinstance(t, FractionalLaplacian) and t.alpha < 1.0:
                warnings.warn(
                    f"fractional diffusion of order {t.alpha} < 1 with Burgers transport "
                    "is outside the well-posed range"
                )
    return Preset("custom", a, v, (dims,))
