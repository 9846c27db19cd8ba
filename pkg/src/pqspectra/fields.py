"""Variable exponents, weights, and problem configuration.

Exponent and weight fields are collocated at mesh nodes and interpolated with
the same P1 basis as the unknown, so every power evaluation is local to a
quadrature point. Extrema of P1 interpolants sit at nodes, hence the cached
inf/sup over nodal values are exact for the discrete representation.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .mesh import MeshDomain

__all__ = [
    "FieldError",
    "ExponentField",
    "WeightField",
    "CriticalExponentField",
    "Tolerances",
    "ProblemConfig",
    "CaseClass",
    "make_exponent",
    "make_weight",
    "pointwise_max_exponent",
    "critical_exponent",
    "classify_case",
    "eval_xy",
    "build_problem",
]


class FieldError(ValueError):
    """Raised when a field violates a standing positivity/continuity assumption."""


def _node_loc(mesh: MeshDomain, idx: int, boundary: bool) -> str:
    node = mesh.boundary_nodes[idx] if boundary else idx
    x, y = mesh.nodes[node]
    return f"node {int(node)} (x={x:.6g}, y={y:.6g})"


@dataclass(frozen=True)
class ExponentField:
    """Nodal exponent with inf strictly above 1 and cached bounds."""

    mesh: MeshDomain
    values: np.ndarray  # (N,)
    inf_val: float
    sup_val: float

    def at_cells(self) -> np.ndarray:
        cached = self.__dict__.get("_at_cells")
        if cached is None:
            cached = self.mesh.value_at_cells(self.values)
            object.__setattr__(self, "_at_cells", cached)
        return cached

    def at_boundary(self) -> np.ndarray:
        cached = self.__dict__.get("_at_boundary")
        if cached is None:
            cached = self.mesh.boundary_values(self.values)
            object.__setattr__(self, "_at_boundary", cached)
        return cached

    def is_constant(self, tol: float = 1e-12) -> bool:
        return self.sup_val - self.inf_val <= tol

    def conjugate(self) -> "ExponentField":
        """Pointwise Hoelder conjugate p/(p-1); well-defined since inf > 1."""
        return make_exponent(self.mesh, self.values / (self.values - 1.0))


@dataclass(frozen=True)
class WeightField:
    """Nodal weight on the volume (alpha-type) or on boundary nodes (beta-type).

    Volume weights must be strictly positive. Boundary weights are either
    strictly positive (Robin) or identically zero (Neumann); mixed signs and
    partially-zero data are rejected.
    """

    mesh: MeshDomain
    values: np.ndarray
    domain: str  # "volume" | "boundary"
    inf_val: float
    sup_val: float

    @property
    def is_zero(self) -> bool:
        return self.sup_val == 0.0


def make_exponent(mesh: MeshDomain, values) -> ExponentField:
    vals = np.broadcast_to(np.asarray(values, dtype=float), (mesh.n_nodes,)).copy()
    if not np.all(np.isfinite(vals)):
        i = int(np.argmax(~np.isfinite(vals)))
        raise FieldError(f"exponent field is not finite at {_node_loc(mesh, i, False)}")
    if vals.min() <= 1.0:
        i = int(np.argmin(vals))
        raise FieldError(
            f"exponent field must stay strictly above 1; got {vals[i]:.6g} at "
            f"{_node_loc(mesh, i, False)}"
        )
    return ExponentField(mesh, vals, float(vals.min()), float(vals.max()))


def make_weight(mesh: MeshDomain, values, domain: str) -> WeightField:
    if domain not in ("volume", "boundary"):
        raise ValueError(f"weight domain must be 'volume' or 'boundary', got {domain!r}")
    n = mesh.n_nodes if domain == "volume" else mesh.boundary_nodes.shape[0]
    vals = np.broadcast_to(np.asarray(values, dtype=float), (n,)).copy()
    if not np.all(np.isfinite(vals)):
        i = int(np.argmax(~np.isfinite(vals)))
        raise FieldError(f"weight field is not finite at {_node_loc(mesh, i, domain == 'boundary')}")
    lo, hi = float(vals.min()), float(vals.max())
    if domain == "volume":
        if lo <= 0.0:
            i = int(np.argmin(vals))
            raise FieldError(
                f"volume weight must be strictly positive; got {vals[i]:.6g} at "
                f"{_node_loc(mesh, i, False)}"
            )
    else:
        if lo < 0.0:
            i = int(np.argmin(vals))
            raise FieldError(
                f"boundary weight must be nonnegative; got {vals[i]:.6g} at "
                f"{_node_loc(mesh, i, True)}"
            )
        if lo == 0.0 and hi > 0.0:
            i = int(np.argmin(vals))
            raise FieldError(
                "boundary weight must be strictly positive or identically zero; "
                f"vanishes at {_node_loc(mesh, i, True)} while sup is {hi:.6g}"
            )
    return WeightField(mesh, vals, domain, lo, hi)


def pointwise_max_exponent(p: ExponentField, q: ExponentField) -> ExponentField:
    if not p.mesh.same_mesh(q.mesh):
        raise ValueError("exponent fields live on different meshes")
    return make_exponent(p.mesh, np.maximum(p.values, q.values))


@dataclass(frozen=True)
class CriticalExponentField:
    """Pointwise Sobolev limit n*m/(n-m), with +inf where m >= n."""

    values: np.ndarray  # may contain np.inf
    inf_val: float


def critical_exponent(m: ExponentField, n: int) -> CriticalExponentField:
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    v = m.values
    out = np.where(v < n, n * v / np.where(v < n, n - v, 1.0), np.inf)
    return CriticalExponentField(out, float(out.min()))


class CaseClass(str, Enum):
    """Which existence regime a configuration falls into."""

    SUBLINEAR_A = "Sublinear-A"
    SMALL_LAMBDA_B = "SmallLambda-B"
    SUPERLINEAR_C = "Superlinear-C"
    HOMOGENEOUS_P_PLUS_LT_Q = "Homogeneous-pPlusLtQ"
    HOMOGENEOUS_Q_LT_P_MINUS = "Homogeneous-qLtPMinus"
    UNCLASSIFIED = "Unclassified"


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerance bundle; defaults suit the 16x16..64x64 desk meshes."""

    grad_tol: float = 1e-8          # Euclidean norm of the nodal energy covector
    constraint_tol: float = 1e-9    # scale-relative feasibility of constraint functionals
    norm_rtol: float = 1e-12        # relative bisection tolerance for Luxemburg roots
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    max_iter: int = 200_000
    dedup_tol: float = 1e-6         # nodal distance identifying duplicate solutions
    triviality_tol: float = 1e-6    # norm threshold separating solutions from zero
    multiplier_tol: float = 1e-6


@dataclass
class ProblemConfig:
    """One eigenproblem instance: exponents, weights, forcing scale lambda.

    Derived data (pointwise max exponent, its critical exponent, the unit
    boundary weight used by the gradient+trace norm) is computed once here.
    Treated as immutable after construction; safe to share across workers.
    """

    mesh: MeshDomain
    p: ExponentField
    q: ExponentField
    r: ExponentField
    alpha: WeightField
    beta1: WeightField
    beta2: WeightField
    lam: float
    epsilon_reg: float = 1e-8
    tolerances: Tolerances = field(default_factory=Tolerances)
    m: ExponentField = field(init=False)
    m_star: CriticalExponentField = field(init=False)
    ones_boundary: WeightField = field(init=False)

    def __post_init__(self):
        for f in (self.p, self.q, self.r):
            if not f.mesh.same_mesh(self.mesh):
                raise ValueError("exponent field mesh does not match problem mesh")
        if self.alpha.domain != "volume":
            raise ValueError("alpha must be a volume weight")
        for b in (self.beta1, self.beta2):
            if b.domain != "boundary":
                raise ValueError("beta weights must live on the boundary")
        if self.beta1.is_zero != self.beta2.is_zero:
            raise FieldError("boundary weights must be both Robin-positive or both zero")
        if not (self.lam >= 0.0 and np.isfinite(self.lam)):
            raise ValueError(f"lambda must be a finite nonnegative scalar, got {self.lam}")
        self.m = pointwise_max_exponent(self.p, self.q)
        self.m_star = critical_exponent(self.m, 2)
        self.ones_boundary = make_weight(self.mesh, 1.0, "boundary")

    @property
    def robin(self) -> bool:
        return not self.beta1.is_zero

    @property
    def subcritical_margin(self) -> float:
        """(M*)^- minus r^+; solvers require this to be positive."""
        return self.m_star.inf_val - self.r.sup_val

    def require_subcritical(self) -> None:
        if not self.subcritical_margin > 0.0:
            raise FieldError(
                f"growth exponent sup {self.r.sup_val:.6g} reaches the critical "
                f"bound {self.m_star.inf_val:.6g}; solvers need a positive margin"
            )

    def with_lambda(self, lam: float) -> "ProblemConfig":
        return ProblemConfig(
            mesh=self.mesh, p=self.p, q=self.q, r=self.r, alpha=self.alpha,
            beta1=self.beta1, beta2=self.beta2, lam=float(lam),
            epsilon_reg=self.epsilon_reg, tolerances=self.tolerances,
        )


def classify_case(cfg: ProblemConfig) -> CaseClass:
    """Total, deterministic case dispatch from the exponent/weight inequalities."""
    min_pq = min(cfg.p.inf_val, cfg.q.inf_val)
    m_star_inf = cfg.m_star.inf_val
    if cfg.robin:
        if cfg.r.sup_val < min_pq:
            return CaseClass.SUBLINEAR_A
        if cfg.r.inf_val < min_pq <= cfg.r.sup_val < m_star_inf:
            return CaseClass.SMALL_LAMBDA_B
        if cfg.m.sup_val < cfg.r.inf_val and cfg.r.sup_val < m_star_inf:
            return CaseClass.SUPERLINEAR_C
        return CaseClass.UNCLASSIFIED
    # Neumann branch: forcing exponent equal to a constant q above 2
    if cfg.q.is_constant() and cfg.r.is_constant():
        q0 = float(cfg.q.values[0])
        if abs(float(cfg.r.values[0]) - q0) <= 1e-12 and q0 > 2.0:
            if cfg.p.sup_val < q0:
                return CaseClass.HOMOGENEOUS_P_PLUS_LT_Q
            if q0 < cfg.p.inf_val:
                return CaseClass.HOMOGENEOUS_Q_LT_P_MINUS
    return CaseClass.UNCLASSIFIED


# -- expression fields --------------------------------------------------------

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


def eval_xy(expr: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate an arithmetic expression in x, y at the given coordinate arrays.

    Supports +, -, *, /, **, unary minus, the constants pi and e, and the
    functions sin, cos, tan, exp, log, sqrt, abs. Anything else is rejected.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise FieldError(f"cannot parse field expression {expr!r}: {exc.msg}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id == "y":
                return y
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise FieldError(f"unknown name {node.id!r} in field expression {expr!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise FieldError(f"{node.func.id} takes exactly one argument in {expr!r}")
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise FieldError(f"unsupported syntax in field expression {expr!r}")

    out = ev(tree)
    return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()


def _field_values(mesh: MeshDomain, spec, boundary: bool) -> np.ndarray:
    if isinstance(spec, str):
        pts = mesh.nodes[mesh.boundary_nodes] if boundary else mesh.nodes
        return eval_xy(spec, pts[:, 0], pts[:, 1])
    return np.asarray(spec, dtype=float)


def build_problem(
    mesh: MeshDomain,
    p="2", q="2", r="2",
    alpha="1", beta1="1", beta2=None,
    lam: float = 1.0,
    epsilon_reg: float = 1e-8,
    tolerances: Tolerances | None = None,
) -> ProblemConfig:
    """Assemble a ProblemConfig from constants, arrays, or x/y expressions."""
    if beta2 is None:
        beta2 = beta1
    return ProblemConfig(
        mesh=mesh,
        p=make_exponent(mesh, _field_values(mesh, p, False)),
        q=make_exponent(mesh, _field_values(mesh, q, False)),
        r=make_exponent(mesh, _field_values(mesh, r, False)),
        alpha=make_weight(mesh, _field_values(mesh, alpha, False), "volume"),
        beta1=make_weight(mesh, _field_values(mesh, beta1, True), "boundary"),
        beta2=make_weight(mesh, _field_values(mesh, beta2, True), "boundary"),
        lam=float(lam),
        epsilon_reg=float(epsilon_reg),
        tolerances=tolerances or Tolerances(),
    )
