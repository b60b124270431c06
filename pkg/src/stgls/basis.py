"""Tensor-product Lagrange shape functions and Gauss-Legendre quadrature.

Everything lives on the reference cube ``[0, 1]^dim``. Local node ``j`` has
multi-index ``(j_0, ..., j_{dim-1})`` with ``j = sum_a j_a (k+1)**a``, i.e. the
first axis runs fastest and the last axis (time) slowest.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "BasisSpec",
    "QuadratureRule",
    "gauss_rule",
    "shape_values",
    "shape_gradients",
    "shape_pure_second_derivatives",
    "tabulate",
]

_REF_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    degree: int
    dim: int

    def __post_init__(self):
        if self.degree not in (1, 2, 3):
            raise ValueError(f"degree must be 1, 2 or 3, got {self.degree}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")

    @property
    def nodes_per_element(self) -> int:
        return (self.degree + 1) ** self.dim

    @property
    def nodes_1d(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.degree + 1)

    def node_multi_indices(self) -> np.ndarray:
        """Integer multi-indices of the local nodes, shape (nb, dim)."""
        return _multi_indices(self.degree, self.dim)

    def node_points(self) -> np.ndarray:
        """Reference coordinates of the local nodes, shape (nb, dim)."""
        return self.node_multi_indices() / self.degree


@lru_cache(maxsize=None)
def _multi_indices(degree: int, dim: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(degree + 1)] * dim), indexing="ij")
    # first axis fastest
    idx = np.stack([g.ravel(order="F") for g in grids], axis=-1)
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_rule(points_per_axis: int, dim: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule on ``[0, 1]^dim``; weights sum to one.

    A rule with ``q`` points per axis is exact for polynomials of degree
    ``2q - 1`` in each variable.
    """
    if not 1 <= points_per_axis <= 10:
        raise ValueError(f"points_per_axis must lie in [1, 10], got {points_per_axis}")
    if dim < 0:
        raise ValueError(f"dim must be nonnegative, got {dim}")
    x, w = np.polynomial.legendre.leggauss(points_per_axis)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    if dim == 0:
        pts, wts = np.zeros((1, 0)), np.ones(1)
    else:
        idx = _multi_indices(points_per_axis - 1, dim)
        pts = x[idx]
        wts = np.prod(w[idx], axis=1)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts)


def _lagrange_1d(degree: int, x: np.ndarray):
    """Values, first and second derivatives of the 1D equispaced Lagrange
    polynomials at ``x``. Each output has shape ``x.shape + (degree + 1,)``."""
    nodes = np.linspace(0.0, 1.0, degree + 1)
    n = degree + 1
    x = np.asarray(x, dtype=float)[..., None]
    val = np.ones(x.shape[:-1] + (n,))
    d1 = np.zeros_like(val)
    d2 = np.zeros_like(val)
    for i in range(n):
        others = [m for m in range(n) if m != i]
        denom = np.prod([nodes[i] - nodes[m] for m in others])
        factors = [(x[..., 0] - nodes[m]) for m in others]
        v = np.ones(x.shape[:-1])
        for f in factors:
            v = v * f
        g = np.zeros(x.shape[:-1])
        for a in range(len(factors)):
            p = np.ones(x.shape[:-1])
            for b, f in enumerate(factors):
                if b != a:
                    p = p * f
            g = g + p
        s = np.zeros(x.shape[:-1])
        for a in range(len(factors)):
            for b in range(len(factors)):
                if a == b:
                    continue
                p = np.ones(x.shape[:-1])
                for c, f in enumerate(factors):
                    if c != a and c != b:
                        p = p * f
                s = s + p
        val[..., i] = v / denom
        d1[..., i] = g / denom
        d2[..., i] = s / denom
    return val, d1, d2


def _check_points(points: np.ndarray, dim: int) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != dim:
        raise ValueError(f"expected points with trailing dimension {dim}, got {points.shape}")
    if np.any(points < -_REF_TOL) or np.any(points > 1.0 + _REF_TOL):
        raise ValueError("reference point outside [0, 1]^dim")
    return points


def tabulate(spec: BasisSpec, points: np.ndarray, derivatives: int = 1):
    """Evaluate the basis on a batch of reference points.

    Parameters
    ----------
    spec : BasisSpec
    points : array_like, shape (..., dim)
    derivatives : int
        0 returns values only, 1 adds gradients, 2 adds pure second
        derivatives.

    Returns
    -------
    tuple of arrays
        ``values`` with shape (..., nb); ``gradients`` (..., nb, dim);
        ``second`` (..., nb, dim) holding d^2 N / d xi_a^2.
    """
    points = _check_points(points, spec.dim)
    k, dim = spec.degree, spec.dim
    idx = spec.node_multi_indices()  # (nb, dim)
    v1, d1, d2 = _lagrange_1d(k, points)  # (..., dim, k+1)
    # per-axis factor for each basis function: (..., nb, dim)
    axes = np.arange(dim)
    fv = v1[..., axes, idx]
    values = np.prod(fv, axis=-1)
    out = [values]
    if derivatives >= 1:
        fd = d1[..., axes, idx]
        grads = np.empty(values.shape + (dim,))
        for a in range(dim):
            f = fv.copy()
            f[..., a] = fd[..., a]
            grads[..., a] = np.prod(f, axis=-1)
        out.append(grads)
    if derivatives >= 2:
        fs = d2[..., axes, idx]
        sec = np.empty(values.shape + (dim,))
        for a in range(dim):
            f = fv.copy()
            f[..., a] = fs[..., a]
            sec[..., a] = np.prod(f, axis=-1)
        out.append(sec)
    return tuple(out)


def shape_values(spec: BasisSpec, p) -> np.ndarray:
    """Values of all shape functions at one reference point."""
    return tabulate(spec, p, derivatives=0)[0]


def shape_gradients(spec: BasisSpec, p) -> np.ndarray:
    """Reference gradients, shape (nb, dim)."""
    return tabulate(spec, p, derivatives=1)[1]


def shape_pure_second_derivatives(spec: BasisSpec, p) -> np.ndarray:
    """Pure second derivatives d^2 N_i / d xi_a^2, shape (nb, dim)."""
    return tabulate(spec, p, derivatives=2)[2]
