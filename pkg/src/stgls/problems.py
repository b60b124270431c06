"""Benchmark problems for the transient advection-diffusion equation.

All callbacks are vectorized: ``x`` has shape ``(..., dim_space)`` and ``t``
has shape ``(...)``. Scalar callbacks return shape ``(...)`` and the
advection field returns ``(..., dim_space)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import SpaceTimeDomain

__all__ = [
    "ExactSolution",
    "ProblemSpec",
    "from_exact_solution",
    "make_heat_mms",
    "make_advdiff_mms",
    "make_rotating_gaussian",
    "make_rotating_disc",
    "make_gaussian_source",
    "make_problem",
    "PROBLEMS",
    "rotating_field",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ExactSolution:
    value: Callable
    time_derivative: Callable
    spatial_gradient: Callable
    spatial_laplacian: Callable


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of ``u_t + a . grad u - nu lap u = f``.

    Dirichlet data ``dirichlet_g`` applies on the lateral boundary and
    ``initial_u0`` on ``t = t0``. ``nu`` must be strictly positive.
    """

    name: str
    dim_space: int
    nu: float
    advection: Callable
    forcing: Callable
    dirichlet_g: Callable
    initial_u0: Callable
    divergence_free: bool = True
    exact: ExactSolution | None = None
    domain: SpaceTimeDomain | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"diffusivity must be positive, got {self.nu}")
        if self.domain is None:
            object.__setattr__(self, "domain", SpaceTimeDomain(self.dim_space))
        elif self.domain.dim_space != self.dim_space:
            raise ValueError("domain dimension does not match the problem")

    @property
    def has_zero_advection(self) -> bool:
        return bool(self.params.get("zero_advection", False))

    def operator_residual(self, x, t):
        """``u_t + a . grad u - nu lap u`` of the exact solution."""
        ex = self.exact
        a = self.advection(x, t)
        return (ex.time_derivative(x, t) + np.sum(a * ex.spatial_gradient(x, t), axis=-1)
                - self.nu * ex.spatial_laplacian(x, t))


def _zero_field(dim):
    def a(x, t):
        return np.zeros(np.shape(x)[:-1] + (dim,))
    return a


def _constant_field(vel):
    vel = np.asarray(vel, dtype=float)

    def a(x, t):
        return np.broadcast_to(vel, np.shape(x)[:-1] + vel.shape).copy()
    return a


def rotating_field(x, t):
    """Rigid rotation about (1/2, 1/2) with one revolution per unit time."""
    x = np.asarray(x, dtype=float)
    rx = x[..., 0] - 0.5
    ry = x[..., 1] - 0.5
    return np.stack([-TWO_PI * ry, TWO_PI * rx], axis=-1)


def from_exact_solution(name, dim_space, nu, advection, exact: ExactSolution,
                        divergence_free=True, params=None) -> ProblemSpec:
    """Manufactured problem: forcing, boundary and initial data from ``exact``."""

    def forcing(x, t):
        a = advection(x, t)
        return (exact.time_derivative(x, t) + np.sum(a * exact.spatial_gradient(x, t), axis=-1)
                - nu * exact.spatial_laplacian(x, t))

    def initial(x):
        x = np.asarray(x, dtype=float)
        return exact.value(x, np.zeros(x.shape[:-1]))

    return ProblemSpec(name=name, dim_space=dim_space, nu=nu, advection=advection,
                       forcing=forcing, dirichlet_g=exact.value, initial_u0=initial,
                       divergence_free=divergence_free, exact=exact, params=dict(params or {}))


def _sine_mode(dim_space):
    """u = exp(-t) prod_i sin(2 pi x_i) and its derivatives."""

    def value(x, t):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.asarray(t)) * np.prod(np.sin(TWO_PI * x), axis=-1)

    def dt(x, t):
        return -value(x, t)

    def grad(x, t):
        x = np.asarray(x, dtype=float)
        s = np.sin(TWO_PI * x)
        c = np.cos(TWO_PI * x)
        e = np.exp(-np.asarray(t))
        out = np.empty(x.shape)
        for i in range(dim_space):
            f = s.copy()
            f[..., i] = TWO_PI * c[..., i]
            out[..., i] = e * np.prod(f, axis=-1)
        return out

    def lap(x, t):
        return -dim_space * TWO_PI**2 * value(x, t)

    return ExactSolution(value, dt, grad, lap)


def make_heat_mms(nu: float = 1e-2, dim_space: int = 2) -> ProblemSpec:
    """Heat equation with ``u = exp(-t) sin(2 pi x) [sin(2 pi y)]``."""
    return from_exact_solution("heat_mms", dim_space, nu, _zero_field(dim_space), _sine_mode(dim_space),
                               params={"zero_advection": True})


def make_advdiff_mms(nu: float = 1e-2, dim_space: int = 2, velocity: float = 1.0) -> ProblemSpec:
    """Advection-diffusion with the same exact solution as :func:`make_heat_mms`.

    In two space dimensions the field is the unit-angular-velocity rotation
    about the domain centre. The one-dimensional variant, provided for cheap
    convergence runs, uses the constant velocity ``velocity``.
    """
    if dim_space == 2:
        adv = rotating_field
    else:
        adv = _constant_field([velocity])
    return from_exact_solution("advdiff_mms", dim_space, nu, adv, _sine_mode(dim_space))


def make_rotating_gaussian(nu: float = 1e-4, center=(1 / 3, 1 / 3), width_d: float = 0.05) -> ProblemSpec:
    """Gaussian pulse carried once around the domain centre by t = 1."""
    cx, cy = center

    def u0(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-((x[..., 0] - cx) ** 2 + (x[..., 1] - cy) ** 2) / width_d**2)

    def zero(x, t):
        return np.zeros(np.shape(x)[:-1])

    return ProblemSpec(name="rotating_gaussian", dim_space=2, nu=nu, advection=rotating_field,
                       forcing=zero, dirichlet_g=zero, initial_u0=u0,
                       params={"center": (cx, cy), "width_d": width_d})


def make_rotating_disc(nu: float = 1e-8, center=(1 / 3, 1 / 3), radius_sigma: float = 0.1) -> ProblemSpec:
    """Indicator of a disc of radius ``radius_sigma`` under rigid rotation."""
    cx, cy = center

    def u0(x):
        x = np.asarray(x, dtype=float)
        r2 = ((x[..., 0] - cx) ** 2 + (x[..., 1] - cy) ** 2) / radius_sigma**2
        return np.where(r2 <= 1.0, 1.0, 0.0)

    def zero(x, t):
        return np.zeros(np.shape(x)[:-1])

    return ProblemSpec(name="rotating_disc", dim_space=2, nu=nu, advection=rotating_field,
                       forcing=zero, dirichlet_g=zero, initial_u0=u0,
                       params={"center": (cx, cy), "radius_sigma": radius_sigma})


def make_gaussian_source(nu: float = 0.01, d: float = 0.05, theta: float = 1.0, dim_space: int = 2,
                         center=None) -> ProblemSpec:
    """Decaying Gaussian heat pulse ``u = exp(-2t/theta - |x - x0|^2 / d^2)``.

    The forcing is ``u_t - nu lap u``; boundary data come from ``u`` itself,
    which is small but nonzero on the lateral boundary.
    """
    if not (nu > 0 and d > 0 and theta > 0):
        raise ValueError("nu, d and theta must be positive")
    x0 = np.full(dim_space, 0.5) if center is None else np.asarray(center, dtype=float)

    def value(x, t):
        r2 = np.sum((np.asarray(x, dtype=float) - x0) ** 2, axis=-1)
        return np.exp(-2.0 * np.asarray(t) / theta - r2 / d**2)

    def dt(x, t):
        return -2.0 / theta * value(x, t)

    def grad(x, t):
        r = np.asarray(x, dtype=float) - x0
        return (-2.0 / d**2) * r * value(x, t)[..., None]

    def lap(x, t):
        r2 = np.sum((np.asarray(x, dtype=float) - x0) ** 2, axis=-1)
        return (4.0 * r2 / d**4 - 2.0 * dim_space / d**2) * value(x, t)

    exact = ExactSolution(value, dt, grad, lap)
    return from_exact_solution("gaussian_source", dim_space, nu, _zero_field(dim_space), exact,
                               params={"zero_advection": True, "d": d, "theta": theta})


PROBLEMS = {
    "heat_mms": make_heat_mms,
    "advdiff_mms": make_advdiff_mms,
    "rotating_gaussian": make_rotating_gaussian,
    "rotating_disc": make_rotating_disc,
    "gaussian_source": make_gaussian_source,
}


def make_problem(name: str, nu: float | None = None, dim_space: int | None = None) -> ProblemSpec:
    """Build a named problem; ``nu``/``dim_space`` override the defaults."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    kwargs = {}
    if nu is not None:
        kwargs["nu"] = nu
    if dim_space is not None:
        if name in ("rotating_gaussian", "rotating_disc"):
            if dim_space != 2:
                raise ValueError(f"{name} is defined in two space dimensions only")
        else:
            kwargs["dim_space"] = dim_space
    return factory(**kwargs)
