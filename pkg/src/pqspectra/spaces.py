"""Modulars and Luxemburg norms for variable-exponent spaces.

A Luxemburg norm is the root of tau -> modular(u/tau) = 1, which is strictly
decreasing for u not identically zero, so a bracketed bisection is globally
convergent. Bisection is preferred over Newton because the modular is only
available through quadrature. The norm of the zero function is 0 by the
empty-infimum convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import ExponentField, WeightField
from .mesh import MeshDomain

__all__ = [
    "DiscreteFunction",
    "lebesgue_modular",
    "luxemburg_norm",
    "sobolev_beta_modular",
    "sobolev_beta_norm",
    "norm_m1",
    "holder_pair_bound",
]


@dataclass(frozen=True)
class DiscreteFunction:
    """Nodal P1 function on a MeshDomain."""

    mesh: MeshDomain
    values: np.ndarray  # (N,)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_nodes,):
            raise ValueError(f"expected {self.mesh.n_nodes} nodal values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("discrete function has non-finite nodal values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, mesh: MeshDomain, c: float) -> "DiscreteFunction":
        return cls(mesh, np.full(mesh.n_nodes, float(c)))

    @classmethod
    def zero(cls, mesh: MeshDomain) -> "DiscreteFunction":
        return cls.constant(mesh, 0.0)

    @classmethod
    def from_callable(cls, mesh: MeshDomain, f: Callable) -> "DiscreteFunction":
        return cls(mesh, np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float))

    def gradient_at_cells(self) -> np.ndarray:
        return self.mesh.gradient_at_cells(self.values)

    def scaled(self, c: float) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, c * self.values)


def _require_same_mesh(u: DiscreteFunction, f) -> None:
    if not u.mesh.same_mesh(f.mesh):
        raise ValueError("function and field live on different meshes")


def lebesgue_modular(u: DiscreteFunction, p: ExponentField) -> float:
    """Vertex-rule integral of |u|^p over the volume."""
    _require_same_mesh(u, p)
    return float(u.mesh.node_weights @ np.abs(u.values) ** p.values)


def sobolev_beta_modular(u: DiscreteFunction, p: ExponentField, beta: WeightField) -> float:
    """Integral of |grad u|^p over the volume plus beta*|u|^p over the boundary."""
    _require_same_mesh(u, p)
    _require_same_mesh(u, beta)
    if beta.domain != "boundary":
        raise ValueError("beta must be a boundary weight")
    if beta.is_zero:
        raise ValueError("beta is identically zero; the gradient+trace modular degenerates")
    m = u.mesh
    gnorm = np.linalg.norm(u.gradient_at_cells(), axis=1)
    vol = float(m.volume_weights @ gnorm ** p.at_cells())
    ub = np.abs(m.boundary_values(u.values))
    bnd = float(m.boundary_weights @ (beta.values * ub ** p.at_boundary()))
    return vol + bnd


def _luxemburg_root(modular_of_scaled, modular_at_one: float, rtol: float, max_iter: int = 1200) -> float:
    """Bisection for the unique tau with modular(u/tau) = 1.

    modular_of_scaled(tau) must be continuous and strictly decreasing with
    limits +inf at 0+ and 0 at +inf, which holds for any nonzero u.
    """
    lo, hi = 1e-16, max(1.0, modular_at_one) + 1.0
    it = 0
    while modular_of_scaled(hi) > 1.0:
        lo = hi
        hi *= 2.0
        it += 1
        if it > 1200:
            raise RuntimeError(f"Luxemburg bracket expansion failed: bracket [{lo}, {hi}]")
    while modular_of_scaled(lo) < 1.0:
        hi = lo
        lo *= 0.5
        it += 1
        if it > 2400:
            raise RuntimeError(f"Luxemburg bracket expansion failed: bracket [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if modular_of_scaled(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * mid:
            return 0.5 * (lo + hi)
    raise RuntimeError(
        f"Luxemburg bisection did not converge after {max_iter} iterations; "
        f"bracket [{lo}, {hi}]"
    )


def luxemburg_norm(u: DiscreteFunction, p: ExponentField, rtol: float = 1e-12) -> float:
    """Luxemburg norm of u in the variable-exponent Lebesgue space."""
    _require_same_mesh(u, p)
    w = u.mesh.node_weights
    absu = np.abs(u.values)
    if not absu.any():
        return 0.0
    pv = p.values
    rho1 = float(w @ absu ** pv)
    return _luxemburg_root(lambda t: float(w @ (absu / t) ** pv), rho1, rtol)


def sobolev_beta_norm(u: DiscreteFunction, p: ExponentField, beta: WeightField, rtol: float = 1e-12) -> float:
    """Luxemburg-type norm generated by the gradient+trace modular."""
    _require_same_mesh(u, p)
    m = u.mesh
    gnorm = np.linalg.norm(u.gradient_at_cells(), axis=1)
    ub = np.abs(m.boundary_values(u.values))
    if not (gnorm.any() or ub.any()):
        return 0.0
    if beta.is_zero:
        raise ValueError("beta is identically zero; the gradient+trace norm degenerates")
    p_cell, p_bnd = p.at_cells(), p.at_boundary()
    wv, wb = m.volume_weights, m.boundary_weights * beta.values

    def rho(t: float) -> float:
        return float(wv @ (gnorm / t) ** p_cell + wb @ (ub / t) ** p_bnd)

    return _luxemburg_root(rho, rho(1.0), rtol)


def norm_m1(u: DiscreteFunction, cfg) -> float:
    """Norm from the pointwise-max exponent with unit boundary weight.

    This is the norm every ball/sphere radius in the solvers refers to.
    """
    return sobolev_beta_norm(u, cfg.m, cfg.ones_boundary, rtol=cfg.tolerances.norm_rtol)


def holder_pair_bound(u: DiscreteFunction, v: DiscreteFunction, p: ExponentField):
    """Return (integral of |u v|, 2 * ||u||_p * ||v||_conjugate) for property checks."""
    _require_same_mesh(u, p)
    _require_same_mesh(v, p)
    lhs = float(u.mesh.node_weights @ np.abs(u.values * v.values))
    rhs = 2.0 * luxemburg_norm(u, p) * luxemburg_norm(v, p.conjugate())
    return lhs, rhs
