"""Problem models: variable spaces, simple nonsmooth terms, the generic
two-block structure, conic quadratic programs and their duals.

Matrix variables are stored in packed symmetric coordinates (``svec``) so
that every model exposes plain real vectors to the solvers; the packing is
isometric, which keeps norms, inner products and spectral bounds unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import matcone, polyset
from .errors import DimensionError, DomainError, InputError

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# variable spaces and symmetric-matrix packing
# ---------------------------------------------------------------------------


def svec_dim(p: int) -> int:
    """Packed length of a ``p`` x ``p`` symmetric matrix."""
    return p * (p + 1) // 2


def svec(m: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix row-major over the upper triangle.

    Off-diagonal entries are scaled by ``sqrt(2)`` so the packing preserves
    the Frobenius inner product.
    """
    m = matcone.check_symmetric(np.asarray(m, dtype=float), "svec input")
    p = m.shape[0]
    iu = np.triu_indices(p)
    out = m[iu].copy()
    out[iu[0] != iu[1]] *= _SQRT2
    return out


def smat(v: np.ndarray, p: Optional[int] = None) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError("smat expects a 1-d packed vector")
    if p is None:
        p = int(round((math.sqrt(8 * v.size + 1) - 1) / 2))
    if svec_dim(p) != v.size:
        raise DimensionError(f"packed length {v.size} is not a triangular number")
    out = np.zeros((p, p))
    iu = np.triu_indices(p)
    vals = v.copy()
    vals[iu[0] != iu[1]] /= _SQRT2
    out[iu] = vals
    out = out + out.T
    out[np.diag_indices(p)] /= 2.0
    return out


@dataclass(frozen=True)
class SpaceSpec:
    """A variable space: plain vectors, or symmetric matrices in packed form."""

    kind: str
    dim: int
    side: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("vector", "symmetric"):
            raise InputError(f"unknown space kind {self.kind!r}")
        if self.kind == "symmetric":
            if self.side is None or svec_dim(self.side) != self.dim:
                raise DimensionError("symmetric space needs dim = side*(side+1)/2")
        elif self.side is not None:
            raise InputError("vector space must not set a matrix side")

    @classmethod
    def vector(cls, n: int) -> "SpaceSpec":
        return cls("vector", int(n))

    @classmethod
    def symmetric(cls, p: int) -> "SpaceSpec":
        return cls("symmetric", svec_dim(int(p)), int(p))

    def to_matrix(self, v: np.ndarray) -> np.ndarray:
        if self.kind != "symmetric":
            raise DomainError("space has no matrix form")
        return smat(v, self.side)

    def from_matrix(self, m: np.ndarray) -> np.ndarray:
        if self.kind != "symmetric":
            raise DomainError("space has no matrix form")
        return svec(m)


# ---------------------------------------------------------------------------
# simple (prox-friendly) functions
# ---------------------------------------------------------------------------


class SimpleFun:
    """A convex function with an exact proximal map in packed coordinates."""

    dim: int

    def value(self, v: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, t: float, v: np.ndarray) -> np.ndarray:
        """``argmin_w  f(w) + ||w - v||^2 / (2 t)``."""
        raise NotImplementedError

    def _check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise DimensionError(f"expected vector of length {self.dim}, got {v.shape}")
        return v


class ZeroFun(SimpleFun):
    """The identically-zero function; its prox is the identity."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def value(self, v):
        self._check(v)
        return 0.0

    def prox(self, t, v):
        return self._check(v).copy()


class IndicatorBox(SimpleFun):
    """Indicator of a coordinate box; prox is the clamp."""

    def __init__(self, box: polyset.BoxSet):
        self.box = box
        self.dim = box.dim

    def value(self, v):
        v = self._check(v)
        return 0.0 if self.box.contains(v) else math.inf

    def prox(self, t, v):
        return polyset.project_box(self.box, self._check(v))


class IndicatorPSDCone(SimpleFun):
    """Indicator of the positive-semidefinite cone on a packed matrix space."""

    def __init__(self, space: SpaceSpec):
        if space.kind != "symmetric":
            raise InputError("the semidefinite cone needs a symmetric matrix space")
        self.space = space
        self.dim = space.dim

    def value(self, v, tol: float = 1e-9):
        m = self.space.to_matrix(self._check(v))
        lo = float(np.linalg.eigvalsh(m)[0])
        scale = 1.0 + float(np.abs(m).max(initial=0.0))
        return 0.0 if lo >= -tol * scale else math.inf

    def prox(self, t, v):
        m = self.space.to_matrix(self._check(v))
        return self.space.from_matrix(matcone.project_psd(m))


class StackedFun(SimpleFun):
    """Separable sum of simple functions acting on consecutive slices."""

    def __init__(self, parts: Sequence[SimpleFun]):
        self.parts = tuple(parts)
        self.dim = sum(p.dim for p in self.parts)
        offs = np.cumsum([0] + [p.dim for p in self.parts])
        self.slices = [slice(int(a), int(b)) for a, b in zip(offs[:-1], offs[1:])]

    def value(self, v):
        v = self._check(v)
        return float(sum(p.value(v[s]) for p, s in zip(self.parts, self.slices)))

    def prox(self, t, v):
        v = self._check(v)
        out = np.empty_like(v)
        for p, s in zip(self.parts, self.slices):
            out[s] = p.prox(t, v[s])
        return out


class PolyFun(SimpleFun):
    """Simple function that also knows its convex conjugate.

    Adds the conjugate value/prox and the prox of ``theta(z) = conj(-z)``,
    which is what the dual solvers minimize in place of the original term.
    """

    def conj_value(self, v: np.ndarray) -> float:
        raise NotImplementedError

    def conj_prox(self, t: float, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def theta_value(self, z: np.ndarray) -> float:
        return self.conj_value(-self._check(z))

    def theta_prox(self, t: float, z: np.ndarray) -> np.ndarray:
        """Prox of ``t * theta`` via sign flips on the conjugate prox."""
        return -self.conj_prox(t, -self._check(z))


class BoxPolyFun(PolyFun):
    """Indicator of a box, with its support function as conjugate."""

    def __init__(self, box: polyset.BoxSet):
        self.box = box
        self.dim = box.dim

    def value(self, v):
        v = self._check(v)
        return 0.0 if self.box.contains(v) else math.inf

    def prox(self, t, v):
        return polyset.project_box(self.box, self._check(v))

    def conj_value(self, v):
        v = self._check(v)
        lo, hi = self.box.lower, self.box.upper
        total = 0.0
        for vi, li, hi_ in zip(v, lo, hi):
            if vi > 0:
                total += math.inf if not np.isfinite(hi_) else vi * hi_
            elif vi < 0:
                total += math.inf if not np.isfinite(li) else vi * li
        return float(total)

    def conj_prox(self, t, v):
        # prox_support carries the reflected support function, so flip in
        # and out to land on the plain conjugate.
        return -polyset.prox_support(self.box, t, -self._check(v))


class WeightedL1(PolyFun):
    """Weighted one-norm ``sum_i w_i |v_i|`` with nonnegative weights."""

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1:
            raise DimensionError("weights must be a 1-d array")
        if not np.isfinite(w).all() or (w < 0).any():
            raise InputError("weights must be finite and nonnegative")
        self.weights = w
        self.dim = w.size

    def value(self, v):
        return float(self.weights @ np.abs(self._check(v)))

    def prox(self, t, v):
        v = self._check(v)
        if not np.isfinite(t) or t <= 0:
            raise InputError(f"prox parameter must be a positive float, got {t}")
        return np.sign(v) * np.maximum(np.abs(v) - t * self.weights, 0.0)

    def conj_value(self, v, tol: float = 1e-9):
        v = self._check(v)
        scale = 1.0 + float(self.weights.max(initial=0.0))
        return 0.0 if (np.abs(v) <= self.weights + tol * scale).all() else math.inf

    def conj_prox(self, t, v):
        return np.clip(self._check(v), -self.weights, self.weights)


# ---------------------------------------------------------------------------
# the generic two-block model
# ---------------------------------------------------------------------------


def _as_sym_matrix(m, dim: int, name: str) -> Optional[np.ndarray]:
    if m is None:
        return None
    m = np.asarray(m, dtype=float)
    if m.shape != (dim, dim):
        raise DimensionError(f"{name} must be {dim}x{dim}, got {m.shape}")
    if not np.isfinite(m).all():
        raise InputError(f"{name} contains non-finite entries")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(m).max())):
        raise InputError(f"{name} must be symmetric")
    return matcone.symmetrize(m)


@dataclass
class BlockSpec:
    """One block of the two-block model.

    The smooth part is the quadratic ``v -> 0.5 v' hess v + lin' v`` (``hess``
    may be ``None`` for zero); ``fun`` is the simple nonsmooth term.  The
    ``solver`` policy decides how the block subproblem is handled:
    ``"auto"`` factors the regularized quadratic directly, ``"majorize"``
    replaces it with a scalar bound so the prox of ``fun`` applies, and
    ``"factory"`` defers to a user hook building the update callable.
    """

    dim: int
    fun: SimpleFun
    hess: Optional[np.ndarray] = None
    lin: Optional[np.ndarray] = None
    solver: str = "auto"
    solver_factory: Optional[Callable] = None

    def __post_init__(self):
        self.dim = int(self.dim)
        if self.fun.dim != self.dim:
            raise DimensionError("block function dimension mismatch")
        self.hess = _as_sym_matrix(self.hess, self.dim, "block hessian")
        if self.lin is None:
            self.lin = np.zeros(self.dim)
        else:
            self.lin = np.asarray(self.lin, dtype=float)
            if self.lin.shape != (self.dim,):
                raise DimensionError("block linear term has wrong length")
            if not np.isfinite(self.lin).all():
                raise InputError("block linear term contains non-finite entries")
        if self.solver not in ("auto", "majorize", "factory"):
            raise InputError(f"unknown block solver policy {self.solver!r}")
        if self.solver == "factory" and self.solver_factory is None:
            raise InputError("solver policy 'factory' needs a solver_factory")

    def hess_apply(self, v: np.ndarray) -> np.ndarray:
        return self.hess @ v if self.hess is not None else np.zeros_like(v)

    def smooth_value(self, v: np.ndarray) -> float:
        return 0.5 * float(v @ self.hess_apply(v)) + float(self.lin @ v)

    def smooth_grad(self, v: np.ndarray) -> np.ndarray:
        return self.hess_apply(v) + self.lin


@dataclass
class TwoBlockProblem:
    """``min f1(y) + f2(z)  subject to  A1' y + A2' z = rhs``.

    ``adj1``/``adj2`` are the matrices of the adjoint maps carrying each
    block into the constraint space (so the constraint reads
    ``adj1 @ y + adj2 @ z = rhs``).
    """

    block1: BlockSpec
    block2: BlockSpec
    adj1: np.ndarray
    adj2: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.adj1 = np.asarray(self.adj1, dtype=float)
        self.adj2 = np.asarray(self.adj2, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        nx = self.rhs.size
        if self.rhs.ndim != 1:
            raise DimensionError("constraint right-hand side must be 1-d")
        if self.adj1.shape != (nx, self.block1.dim):
            raise DimensionError(
                f"adj1 must be {nx}x{self.block1.dim}, got {self.adj1.shape}"
            )
        if self.adj2.shape != (nx, self.block2.dim):
            raise DimensionError(
                f"adj2 must be {nx}x{self.block2.dim}, got {self.adj2.shape}"
            )
        for name, m in (("adj1", self.adj1), ("adj2", self.adj2)):
            if not np.isfinite(m).all():
                raise InputError(f"{name} contains non-finite entries")
        if not np.isfinite(self.rhs).all():
            raise InputError("constraint right-hand side contains non-finite entries")

    @property
    def mult_dim(self) -> int:
        return self.rhs.size

    def feas_residual(self, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.adj1 @ y + self.adj2 @ z - self.rhs

    def objective(self, y: np.ndarray, z: np.ndarray) -> float:
        return (
            self.block1.fun.value(y)
            + self.block1.smooth_value(y)
            + self.block2.fun.value(z)
            + self.block2.smooth_value(z)
        )

    def residual_map(self, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Stacked first-order optimality residual at ``(x, y, z)``.

        Each block contributes ``v - prox(v - grad)`` with unit prox
        parameter, where ``grad`` couples in the multiplier through the
        adjoint of the constraint map; the last slice is the constraint gap.
        """
        g1 = self.block1.smooth_grad(y) + self.adj1.T @ x
        g2 = self.block2.smooth_grad(z) + self.adj2.T @ x
        r1 = y - self.block1.fun.prox(1.0, y - g1)
        r2 = z - self.block2.fun.prox(1.0, z - g2)
        r3 = self.rhs - self.adj1 @ y - self.adj2 @ z
        return np.concatenate([r1, r2, r3])

    def residual_scale(self) -> float:
        return 1.0 + float(
            np.linalg.norm(self.rhs)
            + np.linalg.norm(self.block1.lin)
            + np.linalg.norm(self.block2.lin)
        )


@dataclass(frozen=True)
class KKTPoint:
    """A primal-dual candidate for the two-block model."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.y, self.z, self.x])


# ---------------------------------------------------------------------------
# conic quadratic programs
# ---------------------------------------------------------------------------


@dataclass
class ConicQP:
    """``min 0.5 <x,Qx> + <cost,x> + cone(x) + poly(u)  s.t.  Ax=b, x=u``.

    ``cone`` is either ``"psd"`` (matrix variable constrained to the
    semidefinite cone) or ``"none"``; ``poly`` is the simple polyhedral term
    applied to the duplicate variable ``u``.
    """

    space: SpaceSpec
    quad: Optional[np.ndarray]
    cost: np.ndarray
    con_mat: np.ndarray
    con_rhs: np.ndarray
    cone: str
    poly: PolyFun

    def __post_init__(self):
        n = self.space.dim
        self.quad = _as_sym_matrix(self.quad, n, "quadratic term")
        if self.quad is not None:
            lo = float(np.linalg.eigvalsh(self.quad)[0])
            if lo < -1e-9 * (1.0 + float(np.abs(self.quad).max())):
                raise DomainError("quadratic term must be positive semidefinite")
        self.cost = np.asarray(self.cost, dtype=float)
        if self.cost.shape != (n,):
            raise DimensionError("cost vector has wrong length")
        self.con_mat = np.asarray(self.con_mat, dtype=float)
        if self.con_mat.ndim != 2 or self.con_mat.shape[1] != n:
            raise DimensionError("constraint matrix must have one column per coordinate")
        self.con_rhs = np.asarray(self.con_rhs, dtype=float)
        if self.con_rhs.shape != (self.con_mat.shape[0],):
            raise DimensionError("constraint right-hand side length mismatch")
        for name, arr in (
            ("cost", self.cost),
            ("constraint matrix", self.con_mat),
            ("constraint rhs", self.con_rhs),
        ):
            if not np.isfinite(arr).all():
                raise InputError(f"{name} contains non-finite entries")
        if self.cone not in ("psd", "none"):
            raise InputError(f"unknown cone {self.cone!r}")
        if self.cone == "psd" and self.space.kind != "symmetric":
            raise InputError("a semidefinite cone needs a symmetric matrix space")
        if self.poly.dim != n:
            raise DimensionError("polyhedral term dimension mismatch")

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def n_eq(self) -> int:
        return self.con_mat.shape[0]

    def quad_apply(self, v: np.ndarray) -> np.ndarray:
        return self.quad @ v if self.quad is not None else np.zeros_like(v)

    def cone_fun(self) -> SimpleFun:
        if self.cone == "psd":
            return IndicatorPSDCone(self.space)
        return ZeroFun(self.dim)

    def cone_project(self, v: np.ndarray) -> np.ndarray:
        if self.cone == "psd":
            return self.space.from_matrix(
                matcone.project_psd(self.space.to_matrix(v))
            )
        return np.asarray(v, dtype=float).copy()

    def polar_cone_project(self, v: np.ndarray) -> np.ndarray:
        if self.cone == "psd":
            return self.space.from_matrix(
                matcone.project_nsd(self.space.to_matrix(v))
            )
        return np.zeros_like(np.asarray(v, dtype=float))

    def primal_objective(self, x: np.ndarray, u: Optional[np.ndarray] = None) -> float:
        if u is None:
            u = x
        return (
            0.5 * float(x @ self.quad_apply(x))
            + float(self.cost @ x)
            + self.poly.value(u)
        )

    def dual_objective(
        self, s: np.ndarray, y: np.ndarray, w: np.ndarray, z: np.ndarray
    ) -> float:
        """Value of the maximization form of the dual at ``(s, y, w, z)``."""
        return (
            float(self.con_rhs @ y)
            - 0.5 * float(w @ self.quad_apply(w))
            - self.poly.theta_value(z)
        )


def primal_two_block(qp: ConicQP) -> TwoBlockProblem:
    """Embed a conic QP into the generic two-block model.

    Block one is the conic variable (quadratic plus cone indicator), block
    two the polyhedral duplicate; the coupling constraint stacks ``Ax = b``
    over ``x - u = 0``.
    """
    n, m = qp.dim, qp.n_eq
    eye = np.eye(n)
    adj1 = np.vstack([qp.con_mat, eye])
    adj2 = np.vstack([np.zeros((m, n)), -eye])
    rhs = np.concatenate([qp.con_rhs, np.zeros(n)])
    block1 = BlockSpec(dim=n, fun=qp.cone_fun(), hess=qp.quad, lin=qp.cost,
                       solver="majorize")
    block2 = BlockSpec(dim=n, fun=qp.poly)
    return TwoBlockProblem(block1, block2, adj1, adj2, rhs)


def split_primal_multiplier(qp: ConicQP, x_mult: np.ndarray):
    """Translate the stacked two-block multiplier back to conic-QP duals.

    The embedding couples through ``+<mult, constraints>`` while the conic
    form uses ``-<duals, constraints>``, so both pieces flip sign.
    """
    x_mult = np.asarray(x_mult, dtype=float)
    if x_mult.shape != (qp.n_eq + qp.dim,):
        raise DimensionError("stacked multiplier has wrong length")
    return -x_mult[: qp.n_eq], -x_mult[qp.n_eq:]


# ---------------------------------------------------------------------------
# the reduced dual model
# ---------------------------------------------------------------------------


@dataclass
class DualModel:
    """Dual of a conic QP with the quadratic restricted to its range.

    Variables: cone slack ``s``, equality multiplier ``y``, range coordinates
    ``w_hat`` (so ``w = basis @ w_hat``), and the polyhedral dual ``z``;
    feasibility reads ``s + A' y - Q w + z = cost``.
    """

    qp: ConicQP
    basis: np.ndarray
    eigs: np.ndarray

    @property
    def rank(self) -> int:
        return self.eigs.size

    def w_full(self, w_hat: np.ndarray) -> np.ndarray:
        return self.basis @ w_hat if self.rank else np.zeros(self.qp.dim)

    def quad_w(self, w_hat: np.ndarray) -> np.ndarray:
        """``Q w`` for ``w = basis @ w_hat`` (uses ``Q basis = basis * eigs``)."""
        return self.basis @ (self.eigs * w_hat) if self.rank else np.zeros(self.qp.dim)

    def feas_residual(self, s, y, w_hat, z) -> np.ndarray:
        return s + self.qp.con_mat.T @ y - self.quad_w(w_hat) + z - self.qp.cost

    def objective(self, s, y, w_hat, z) -> float:
        """Minimization-form dual objective (negated maximization value)."""
        return (
            -float(self.qp.con_rhs @ y)
            + 0.5 * float((self.eigs * w_hat) @ w_hat)
            + self.qp.poly.theta_value(z)
        )


def build_dual_model(qp: ConicQP, rank_tol: float = 1e-10) -> DualModel:
    """Factor the quadratic term and assemble the reduced dual model."""
    if qp.quad is None:
        return DualModel(qp, np.zeros((qp.dim, 0)), np.zeros(0))
    vals, vecs = np.linalg.eigh(qp.quad)
    cut = rank_tol * max(1.0, float(np.abs(vals).max(initial=0.0)))
    keep = vals > cut
    return DualModel(qp, vecs[:, keep], vals[keep])


# ---------------------------------------------------------------------------
# optimality residuals for the conic QP and its dual
# ---------------------------------------------------------------------------


def kkt_residual_primal(qp: ConicQP, x, u, y, z) -> dict:
    """Named pieces of the primal first-order system, plus the total norm.

    Components: conic stationarity (projection form), stationarity of the
    duplicate variable, the equality constraints, and the duplication gap.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    grad = qp.quad_apply(x) + qp.cost - qp.con_mat.T @ y - z
    comps = {
        "stat_cone": x - qp.cone_project(x - grad),
        "stat_poly": u - qp.poly.prox(1.0, u - z),
        "eq": qp.con_mat @ x - qp.con_rhs,
        "dup": x - u,
    }
    comps["norm"] = math.sqrt(sum(float(v @ v) for v in comps.values()))
    comps["scale"] = 1.0 + float(
        np.linalg.norm(qp.cost) + np.linalg.norm(qp.con_rhs)
    )
    return comps


def kkt_residual_dual(dual: DualModel, s, y, w_hat, z, x) -> dict:
    """Named pieces of the dual first-order system, plus the total norm.

    ``x`` is the multiplier of the dual feasibility constraint; at a solution
    it coincides with the primal conic variable.
    """
    qp = dual.qp
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    w_hat = np.asarray(w_hat, dtype=float)
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    if qp.cone == "psd":
        stat_s = s - qp.cone_project(s - x)
    else:
        stat_s = s.copy()
    comps = {
        "feas": dual.feas_residual(s, y, w_hat, z),
        "stat_y": qp.con_mat @ x - qp.con_rhs,
        "stat_w": dual.eigs * (w_hat - (dual.basis.T @ x if dual.rank else w_hat)),
        "stat_s": stat_s,
        "stat_z": z - qp.poly.theta_prox(1.0, z - x),
    }
    comps["norm"] = math.sqrt(sum(float(v @ v) for v in comps.values()))
    comps["scale"] = 1.0 + float(
        np.linalg.norm(qp.cost) + np.linalg.norm(qp.con_rhs)
    )
    return comps


def duality_gap(qp: ConicQP, x, u, s, y, w, z) -> dict:
    """Primal value, dual value and their relative gap."""
    pv = qp.primal_objective(x, u)
    dv = qp.dual_objective(s, y, w, z)
    rel = abs(pv - dv) / (1.0 + abs(pv) + abs(dv))
    return {"primal": pv, "dual": dv, "rel_gap": rel}
