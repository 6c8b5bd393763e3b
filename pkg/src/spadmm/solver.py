"""Semi-proximal alternating-direction solver for the two-block model.

One iteration updates the first block, then the second, each against the
augmented Lagrangian plus a proximal term, then takes a scaled multiplier
step.  The proximal matrices are chosen by policy: zero (direct factorization
of the regularized quadratic), a scalar spectral majorization (so the block
update collapses to one proximal map), an explicit user matrix, or a
caller-supplied factory building the whole block update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError, InputError, NumericalError
from .model import BlockSpec, KKTPoint, TwoBlockProblem, ZeroFun

#: upper end of the open multiplier step-size range with guaranteed convergence
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

_RULES = ("auto", "zero", "majorize", "explicit")


def power_lambda_max(
    mat: np.ndarray,
    rel_tol: float = 1e-6,
    max_iter: int = 20000,
) -> float:
    """Largest eigenvalue of a symmetric positive-semidefinite matrix.

    Plain power iteration from a fixed ramp start vector, so results are
    deterministic; the Rayleigh quotient is returned once successive
    estimates agree to ``rel_tol``.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if n == 0:
        return 0.0
    if n == 1:
        return float(mat[0, 0])
    v = 1.0 + np.arange(n) / n
    v /= np.linalg.norm(v)
    lam = float(v @ (mat @ v))
    for _ in range(max_iter):
        w = mat @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (mat @ v))
        if abs(lam_new - lam) <= rel_tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    raise NumericalError("power iteration did not stabilize")


@dataclass
class SPADMMConfig:
    """Run parameters for the two-block solver.

    ``history`` is ``"none"``, ``"full"``, or a positive stride (store every
    k-th iterate).  Step sizes outside ``(0, GOLDEN)`` are rejected unless
    ``allow_tau_override`` is set, in which case the run proceeds but is
    flagged as outside the certified range.
    """

    sigma: float = 1.0
    tau: float = 1.618
    tol: float = 1e-8
    max_iter: int = 10000
    s_rule: str = "auto"
    t_rule: str = "auto"
    s_matrix: Optional[np.ndarray] = None
    t_matrix: Optional[np.ndarray] = None
    history: object = "none"
    allow_tau_override: bool = False
    divergence_factor: float = 1e12
    pd_tol: float = 1e-8
    power_rel_tol: float = 1e-6
    power_inflate: float = 1e-6

    def validate(self) -> None:
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.tau >= GOLDEN and not self.allow_tau_override:
            raise ConfigError(
                f"tau={self.tau} is outside the certified range (0, {GOLDEN:.9f}); "
                "set allow_tau_override to run anyway"
            )
        if not np.isfinite(self.tol) or self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be nonnegative")
        if self.s_rule not in _RULES or self.t_rule not in _RULES:
            raise ConfigError(f"proximal rules must be one of {_RULES}")
        if self.s_rule == "explicit" and self.s_matrix is None:
            raise ConfigError("s_rule 'explicit' needs s_matrix")
        if self.t_rule == "explicit" and self.t_matrix is None:
            raise ConfigError("t_rule 'explicit' needs t_matrix")
        if isinstance(self.history, str):
            if self.history not in ("none", "full"):
                raise ConfigError("history must be 'none', 'full', or a stride")
        elif not (isinstance(self.history, int) and self.history > 0):
            raise ConfigError("history stride must be a positive integer")

    @property
    def tau_in_range(self) -> bool:
        return 0.0 < self.tau < GOLDEN

    def history_stride(self) -> int:
        """0 = none, 1 = every iterate, k = every k-th."""
        if self.history == "none":
            return 0
        if self.history == "full":
            return 1
        return int(self.history)


def _validated_prox_matrix(m, dim: int, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (dim, dim):
        raise ConfigError(f"{name} must be {dim}x{dim}, got {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(m).max(initial=0.0))):
        raise ConfigError(f"{name} must be symmetric")
    lo = float(np.linalg.eigvalsh(m)[0]) if dim else 0.0
    if lo < -1e-10 * (1.0 + float(np.abs(m).max(initial=0.0))):
        raise ConfigError(f"{name} must be positive semidefinite")
    return 0.5 * (m + m.T)


class _BlockSolver:
    """Executable update for one block subproblem.

    Solves ``argmin_v  fun(v) + 0.5 v'Wv + q'v + 0.5 |v - v_prev|^2_S`` where
    ``W`` collects the block quadratic plus the augmented penalty pulled back
    through the constraint map.
    """

    def __init__(self, kind: str, s_matrix: np.ndarray):
        self.kind = kind
        self.s_matrix = s_matrix
        self.cho = None
        self.lam_hat = None
        self.w = None
        self.fun = None
        self.delegate = None

    def solve(self, v_prev: np.ndarray, q: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            rhs = self.s_matrix @ v_prev - q if self.s_matrix is not None else -q
            return scipy.linalg.cho_solve(self.cho, rhs)
        if self.kind == "prox":
            step = v_prev - (self.w @ v_prev + q) / self.lam_hat
            return self.fun.prox(1.0 / self.lam_hat, step)
        return self.delegate.solve(v_prev, q)


def _is_scalar_identity(w: np.ndarray) -> Optional[float]:
    lam = float(w[0, 0])
    if np.abs(w - lam * np.eye(w.shape[0])).max() <= 1e-14 * (1.0 + abs(lam)):
        return lam
    return None


def _build_block_solver(
    problem: TwoBlockProblem,
    index: int,
    config: SPADMMConfig,
) -> _BlockSolver:
    block = problem.block1 if index == 1 else problem.block2
    adj = problem.adj1 if index == 1 else problem.adj2
    rule = config.s_rule if index == 1 else config.t_rule
    explicit = config.s_matrix if index == 1 else config.t_matrix
    name = "S" if index == 1 else "T"
    smooth = block.fun.__class__ is ZeroFun

    w = config.sigma * (adj.T @ adj)
    if block.hess is not None:
        w = w + block.hess
    w = 0.5 * (w + w.T)

    if block.solver == "factory":
        made = block.solver_factory(problem, index, config)
        solver = _BlockSolver("factory", np.asarray(made.s_matrix, dtype=float))
        solver.delegate = made
        return solver

    if rule == "auto":
        rule = block.solver if block.solver != "auto" else ("zero" if smooth else "majorize")

    if rule == "zero":
        if not smooth:
            raise ConfigError(
                f"proximal rule 'zero' on block {index} needs a purely quadratic "
                "block; use 'majorize' or a solver factory"
            )
        solver = _BlockSolver("linear", np.zeros_like(w))
        try:
            solver.cho = scipy.linalg.cho_factor(w)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(
                f"block {index} quadratic is not positive definite with {name}=0; "
                "choose a different proximal rule"
            ) from exc
        return solver

    if rule == "majorize":
        lam = _is_scalar_identity(w)
        if lam is None:
            lam = power_lambda_max(w, rel_tol=config.power_rel_tol)
            lam *= 1.0 + config.power_inflate
        if lam <= 0:
            raise NumericalError(f"block {index} majorization bound is not positive")
        s_matrix = lam * np.eye(block.dim) - w
        solver = _BlockSolver("prox", 0.5 * (s_matrix + s_matrix.T))
        solver.lam_hat = lam
        solver.w = w
        solver.fun = block.fun
        return solver

    # explicit proximal matrix
    s_matrix = _validated_prox_matrix(explicit, block.dim, f"{name} matrix")
    total = w + s_matrix
    if smooth:
        solver = _BlockSolver("linear", s_matrix)
        try:
            solver.cho = scipy.linalg.cho_factor(total)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(
                f"block {index} quadratic plus explicit {name} is not positive definite"
            ) from exc
        return solver
    lam = _is_scalar_identity(total)
    if lam is None:
        raise ConfigError(
            f"explicit {name} with a nonsmooth block must make the regularized "
            "quadratic a positive multiple of the identity"
        )
    solver = _BlockSolver("prox", s_matrix)
    solver.lam_hat = lam
    solver.w = w
    solver.fun = block.fun
    return solver


@dataclass
class SolveResult:
    """Outcome of a solver run.

    ``status`` is ``"converged"``, ``"max_iter"``, ``"diverged"``, or
    ``"uncertified"`` (tolerance reached, but a block certificate failed at
    startup).  ``history`` maps names to per-iteration arrays; iterate
    snapshots appear only when a history stride was requested.
    """

    status: str
    iterations: int
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    residual_norm: float
    residual_scale: float
    feas_norm: float
    objective: float
    sigma: float
    tau: float
    tau_in_range: bool
    pd1_certified: bool
    pd2_certified: bool
    s_matrix: np.ndarray
    t_matrix: np.ndarray
    history: dict = field(default_factory=dict)

    @property
    def point(self) -> KKTPoint:
        return KKTPoint(self.x, self.y, self.z)

    @property
    def rel_residual(self) -> float:
        return self.residual_norm / self.residual_scale


def _pd_certificate(
    block: BlockSpec, adj: np.ndarray, s_matrix: np.ndarray, sigma: float, pd_tol: float
) -> bool:
    total = sigma * (adj.T @ adj) + s_matrix
    if block.hess is not None:
        total = total + block.hess
    scale = 1.0 + float(np.abs(total).max(initial=0.0))
    lo = float(np.linalg.eigvalsh(0.5 * (total + total.T))[0]) if block.dim else 1.0
    return lo >= pd_tol * scale


def _coerce_start(problem: TwoBlockProblem, start: Optional[KKTPoint]) -> KKTPoint:
    if start is None:
        return KKTPoint(
            np.zeros(problem.mult_dim),
            np.zeros(problem.block1.dim),
            np.zeros(problem.block2.dim),
        )
    x = np.asarray(start.x, dtype=float)
    y = np.asarray(start.y, dtype=float)
    z = np.asarray(start.z, dtype=float)
    if (
        x.shape != (problem.mult_dim,)
        or y.shape != (problem.block1.dim,)
        or z.shape != (problem.block2.dim,)
    ):
        raise DimensionError("start point shapes do not match the problem")
    for arr in (x, y, z):
        if not np.isfinite(arr).all():
            raise InputError("start point contains non-finite entries")
    return KKTPoint(x, y, z)


def run_spadmm(
    problem: TwoBlockProblem,
    config: Optional[SPADMMConfig] = None,
    start: Optional[KKTPoint] = None,
    ledger=None,
) -> SolveResult:
    """Run the semi-proximal alternating-direction method on ``problem``.

    If a ``ledger`` is supplied it is bound to the run before the first
    iteration and fed every transition, giving it access to consecutive
    iterates without the solver retaining them.
    """
    config = config or SPADMMConfig()
    config.validate()
    sigma, tau = config.sigma, config.tau

    sol1 = _build_block_solver(problem, 1, config)
    sol2 = _build_block_solver(problem, 2, config)
    pd1 = _pd_certificate(problem.block1, problem.adj1, sol1.s_matrix, sigma, config.pd_tol)
    pd2 = _pd_certificate(problem.block2, problem.adj2, sol2.s_matrix, sigma, config.pd_tol)
    certified = pd1 and pd2

    point = _coerce_start(problem, start)
    x, y, z = point.x.copy(), point.y.copy(), point.z.copy()
    scale = problem.residual_scale()
    stride = config.history_stride()

    history: dict = {"k": [], "residual": []}
    if stride:
        history.update({"y": [], "z": [], "x": []})

    if ledger is not None:
        ledger.bind(problem, config, sol1.s_matrix, sol2.s_matrix)

    adj1, adj2, rhs = problem.adj1, problem.adj2, problem.rhs
    lin1, lin2 = problem.block1.lin, problem.block2.lin

    def snapshot(k: int, res: float) -> None:
        history["k"].append(k)
        history["residual"].append(res)
        if stride and (k % stride == 0 or k == config.max_iter):
            history["y"].append(y.copy())
            history["z"].append(z.copy())
            history["x"].append(x.copy())

    res0 = float(np.linalg.norm(problem.residual_map(x, y, z)))
    snapshot(0, res0)
    if res0 <= config.tol * scale:
        status = "converged" if certified else "uncertified"
        if ledger is not None:
            ledger.finalize(KKTPoint(x, y, z), status)
        return SolveResult(
            status, 0, x, y, z, res0, scale,
            float(np.linalg.norm(problem.feas_residual(y, z))),
            problem.objective(y, z), sigma, tau, config.tau_in_range,
            pd1, pd2, sol1.s_matrix, sol2.s_matrix, history,
        )

    status = "max_iter"
    k = 0
    for k in range(1, config.max_iter + 1):
        y_prev, z_prev, x_prev = y, z, x
        q1 = lin1 + adj1.T @ (x + sigma * (adj2 @ z - rhs))
        y = sol1.solve(y_prev, q1)
        q2 = lin2 + adj2.T @ (x + sigma * (adj1 @ y - rhs))
        z = sol2.solve(z_prev, q2)
        feas = adj1 @ y + adj2 @ z - rhs
        x = x + tau * sigma * feas

        if ledger is not None:
            ledger.record(k, KKTPoint(x_prev, y_prev, z_prev), KKTPoint(x, y, z))

        res = float(np.linalg.norm(problem.residual_map(x, y, z)))
        snapshot(k, res)
        if res <= config.tol * scale:
            status = "converged" if certified else "uncertified"
            break
        norm_u = math.sqrt(float(y @ y) + float(z @ z) + float(x @ x))
        if norm_u > config.divergence_factor * scale:
            status = "diverged"
            break
    else:
        res = float(np.linalg.norm(problem.residual_map(x, y, z)))

    if ledger is not None:
        ledger.finalize(KKTPoint(x, y, z), status)

    return SolveResult(
        status, k, x, y, z, res, scale,
        float(np.linalg.norm(problem.feas_residual(y, z))),
        problem.objective(y, z), sigma, tau, config.tau_in_range,
        pd1, pd2, sol1.s_matrix, sol2.s_matrix, history,
    )


@dataclass
class PrimalSolveResult:
    """Conic-QP view of a primal-embedding solver run."""

    x: np.ndarray
    u: np.ndarray
    eq_mult: np.ndarray
    poly_mult: np.ndarray
    kkt: dict
    inner: SolveResult

    @property
    def status(self) -> str:
        return self.inner.status


def run_primal_spadmm(
    qp,
    config: Optional[SPADMMConfig] = None,
    start: Optional[KKTPoint] = None,
    ledger=None,
) -> PrimalSolveResult:
    """Solve a conic QP through its two-block primal embedding.

    The stacked multiplier is split back into the equality and duplication
    duals of the conic form (with the sign flip the embedding introduces).
    """
    from .model import kkt_residual_primal, primal_two_block, split_primal_multiplier

    problem = primal_two_block(qp)
    result = run_spadmm(problem, config, start, ledger)
    eq_mult, poly_mult = split_primal_multiplier(qp, result.x)
    kkt = kkt_residual_primal(qp, result.y, result.z, eq_mult, poly_mult)
    return PrimalSolveResult(result.y, result.z, eq_mult, poly_mult, kkt, result)
