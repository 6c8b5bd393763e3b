"""Symmetric Gauss-Seidel solver for the reduced dual of a conic QP.

One iteration runs seven closed-form stages: a half-update of the range
coordinates, a half-update of the equality multiplier, the cone-slack
projection, the full multiplier and range updates, the polyhedral-dual
proximal step, and the multiplier ascent.  The sweep is algebraically a
semi-proximal alternating-direction step on the stacked ``(s, y, w)`` block,
which is what ties it back to the two-block engine and its guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import ConfigError, InputError
from .model import (
    BlockSpec,
    ConicQP,
    DualModel,
    IndicatorBox,
    IndicatorPSDCone,
    KKTPoint,
    PolyFun,
    SimpleFun,
    StackedFun,
    TwoBlockProblem,
    ZeroFun,
    build_dual_model,
    duality_gap,
    kkt_residual_dual,
)
from .polyset import BoxSet
from .solver import SPADMMConfig, power_lambda_max

_S_RULES = ("auto", "zero", "majorize")


class ThetaFun(SimpleFun):
    """The dual-side simple term ``z -> conj(-z)`` of a polyhedral function."""

    def __init__(self, poly: PolyFun):
        self.poly = poly
        self.dim = poly.dim

    def value(self, v):
        return self.poly.theta_value(self._check(v))

    def prox(self, t, v):
        return self.poly.theta_prox(t, self._check(v))


@dataclass
class SGSConfig(SPADMMConfig):
    """Solver configuration plus the two sweep-specific proximal rules.

    ``s1_rule`` regularizes the multiplier solve (``auto`` drops it when the
    constraint rows are independent); ``s2_rule`` regularizes the
    range-coordinate solve (``auto`` never needs it on the range basis).
    """

    s1_rule: str = "auto"
    s2_rule: str = "auto"

    def validate(self) -> None:
        super().validate()
        if self.s1_rule not in _S_RULES or self.s2_rule not in _S_RULES:
            raise ConfigError(f"sweep proximal rules must be one of {_S_RULES}")


class SGSWork:
    """Cached factorizations for one penalty value.

    Builds the dense proximal matrices for the two linear stages and
    factorizes both stage operators once; reused until ``sigma`` changes.
    """

    def __init__(self, dual: DualModel, config: SGSConfig):
        qp = dual.qp
        self.sigma = config.sigma
        m, r = qp.n_eq, dual.rank
        a_mat = qp.con_mat
        aa = a_mat @ a_mat.T

        if config.s1_rule == "majorize":
            lam = power_lambda_max(self.sigma * aa, rel_tol=config.power_rel_tol)
            lam *= 1.0 + config.power_inflate
            self.s1 = lam * np.eye(m) - self.sigma * aa
        elif config.s1_rule == "zero":
            self.s1 = np.zeros((m, m))
        else:
            scale = 1.0 + float(np.abs(aa).max(initial=0.0))
            lo = float(np.linalg.eigvalsh(aa)[0]) if m else 1.0
            if lo > 1e-10 * scale:
                self.s1 = np.zeros((m, m))
            else:
                lam = power_lambda_max(self.sigma * aa, rel_tol=config.power_rel_tol)
                lam *= 1.0 + config.power_inflate
                self.s1 = lam * np.eye(m) - self.sigma * aa

        y_op = self.sigma * aa + self.s1
        try:
            self.y_cho = scipy.linalg.cho_factor(y_op) if m else None
        except scipy.linalg.LinAlgError as exc:
            raise ConfigError(
                "multiplier stage operator is singular; pick s1_rule='majorize'"
            ) from exc

        w_diag = dual.eigs + self.sigma * dual.eigs**2
        if config.s2_rule == "majorize":
            lam = float(w_diag.max(initial=0.0)) * (1.0 + config.power_inflate)
            self.s2 = lam * np.eye(r) - np.diag(w_diag)
        else:
            self.s2 = np.zeros((r, r))
        w_op = np.diag(w_diag) + self.s2
        if r and float(np.diag(w_op).min()) <= 0:
            raise ConfigError(
                "range stage operator is singular; pick s2_rule='majorize'"
            )
        self.w_op = w_op
        self.w_diag_total = np.diag(w_op).copy() if r else np.zeros(0)

        self.pd_y = True
        if m:
            scale = 1.0 + float(np.abs(y_op).max(initial=0.0))
            self.pd_y = float(np.linalg.eigvalsh(y_op)[0]) >= config.pd_tol * scale
        self.pd_w = True
        if r:
            scale = 1.0 + float(self.w_diag_total.max(initial=0.0))
            self.pd_w = float(self.w_diag_total.min()) >= config.pd_tol * scale

    def solve_y(self, rhs: np.ndarray) -> np.ndarray:
        if self.y_cho is None:
            return np.zeros(0)
        return scipy.linalg.cho_solve(self.y_cho, rhs)

    def solve_w(self, rhs: np.ndarray) -> np.ndarray:
        return rhs / self.w_diag_total if rhs.size else rhs


@dataclass
class SGSState:
    """Iterates of the sweep, with the half-step caches and stage snapshot."""

    s: np.ndarray
    y: np.ndarray
    w_hat: np.ndarray
    z: np.ndarray
    x: np.ndarray
    k: int = 0
    w_half: Optional[np.ndarray] = None
    y_half: Optional[np.ndarray] = None
    prev: Optional[dict] = None
    work: Optional[SGSWork] = None

    @classmethod
    def zeros(cls, dual: DualModel) -> "SGSState":
        qp = dual.qp
        return cls(
            s=np.zeros(qp.dim),
            y=np.zeros(qp.n_eq),
            w_hat=np.zeros(dual.rank),
            z=np.zeros(qp.dim),
            x=np.zeros(qp.dim),
        )


def _project_slack(qp: ConicQP, v: np.ndarray) -> np.ndarray:
    """Projection onto the feasible slack set (the cone, or the origin)."""
    if qp.cone == "psd":
        return qp.cone_project(v)
    return np.zeros_like(v)


def sgs_step(dual: DualModel, config: SGSConfig, state: SGSState) -> SGSState:
    """One seven-stage sweep; returns the new state with snapshots attached."""
    qp = dual.qp
    sigma, tau = config.sigma, config.tau
    work = state.work
    if work is None or work.sigma != sigma:
        work = SGSWork(dual, config)

    a_mat = qp.con_mat
    c = qp.cost
    b = qp.con_rhs
    s0, y0, w0, z0, x0 = state.s, state.y, state.w_hat, state.z, state.x

    # stage 1: half-update of the range coordinates
    g = s0 + a_mat.T @ y0 + z0 - c
    rhs_w = dual.eigs * (dual.basis.T @ (x0 + sigma * g)) if dual.rank else np.zeros(0)
    w_half = work.solve_w(rhs_w + work.s2 @ w0 if dual.rank else rhs_w)

    # stage 2: half-update of the equality multiplier
    h = s0 - dual.quad_w(w_half) + z0 - c
    y_half = work.solve_y(b - a_mat @ x0 - sigma * (a_mat @ h) + work.s1 @ y0)

    # stage 3: cone-slack projection
    r_sans_s = a_mat.T @ y_half - dual.quad_w(w_half) + z0 - c
    s1 = _project_slack(qp, -r_sans_s - x0 / sigma)

    # stage 4: full multiplier update
    h = s1 - dual.quad_w(w_half) + z0 - c
    y1 = work.solve_y(b - a_mat @ x0 - sigma * (a_mat @ h) + work.s1 @ y0)

    # stage 5: full range update
    g = s1 + a_mat.T @ y1 + z0 - c
    rhs_w = dual.eigs * (dual.basis.T @ (x0 + sigma * g)) if dual.rank else np.zeros(0)
    w1 = work.solve_w(rhs_w + work.s2 @ w0 if dual.rank else rhs_w)

    # stage 6: polyhedral-dual proximal step
    g2 = s1 + a_mat.T @ y1 - dual.quad_w(w1) - c
    z1 = qp.poly.theta_prox(1.0 / sigma, -g2 - x0 / sigma)

    # stage 7: multiplier ascent
    feas = g2 + z1
    x1 = x0 + tau * sigma * feas

    return SGSState(
        s=s1, y=y1, w_hat=w1, z=z1, x=x1, k=state.k + 1,
        w_half=w_half, y_half=y_half,
        prev={"s": s0, "y": y0, "w_hat": w0, "z": z0, "x": x0},
        work=work,
    )


def sgs_optimality_certificates(dual: DualModel, config: SGSConfig,
                                state: SGSState) -> dict:
    """First-order residuals of all seven stages of the last sweep.

    Each residual is the norm of the stage's stationarity condition at the
    values the sweep produced, so every entry should sit at rounding level.
    """
    if state.prev is None or state.work is None:
        raise InputError("certificates need a state produced by a sweep")
    qp = dual.qp
    sigma, tau = state.work.sigma, config.tau
    work = state.work
    a_mat, c, b = qp.con_mat, qp.cost, qp.con_rhs
    p = state.prev
    out = {}

    def w_residual(w_hat, s, y, z, w_prev):
        if not dual.rank:
            return 0.0
        g = s + a_mat.T @ y + z - c
        lhs = work.w_op @ w_hat - work.s2 @ w_prev
        rhs = dual.eigs * (dual.basis.T @ (p["x"] + sigma * g))
        return float(np.linalg.norm(lhs - rhs))

    def y_residual(y, s, w_hat, y_prev):
        if not qp.n_eq:
            return 0.0
        h = s - dual.quad_w(w_hat) + z_old - c
        lhs = (sigma * (a_mat @ a_mat.T) + work.s1) @ y
        rhs = b - a_mat @ p["x"] - sigma * (a_mat @ h) + work.s1 @ y_prev
        return float(np.linalg.norm(lhs - rhs))

    z_old = p["z"]
    out["w_half"] = w_residual(state.w_half, p["s"], p["y"], z_old, p["w_hat"])
    out["y_half"] = y_residual(state.y_half, p["s"], state.w_half, p["y"])

    grad_s = p["x"] + sigma * (
        state.s + a_mat.T @ state.y_half - dual.quad_w(state.w_half) + z_old - c
    )
    out["s"] = float(np.linalg.norm(
        state.s - _project_slack(qp, state.s - grad_s / sigma)
    ))

    out["y_full"] = y_residual(state.y, state.s, state.w_half, p["y"])
    out["w_full"] = w_residual(state.w_hat, state.s, state.y, z_old, p["w_hat"])

    g2 = state.s + a_mat.T @ state.y - dual.quad_w(state.w_hat) - c
    grad_z = p["x"] + sigma * (g2 + state.z)
    out["z"] = float(np.linalg.norm(
        state.z - qp.poly.theta_prox(1.0 / sigma, state.z - grad_z / sigma)
    ))

    out["x"] = float(np.linalg.norm(
        state.x - p["x"] - tau * sigma * (g2 + state.z)
    ))
    return out


def certificate_scale(qp: ConicQP) -> float:
    return 1.0 + float(np.linalg.norm(qp.cost) + np.linalg.norm(qp.con_rhs))


@dataclass
class SGSResult:
    """Outcome of a dual sweep run, with the recovered primal point."""

    status: str
    iterations: int
    s: np.ndarray
    y: np.ndarray
    w_hat: np.ndarray
    w: np.ndarray
    z: np.ndarray
    x: np.ndarray
    primal_x: np.ndarray
    kkt: dict
    gap: dict
    certificates: Optional[dict]
    residual_norm: float
    residual_scale: float
    pd_y: bool
    pd_w: bool
    tau_in_range: bool
    history: dict = field(default_factory=dict)


def run_sgs_spadmm(
    qp: ConicQP,
    config: Optional[SGSConfig] = None,
    start: Optional[SGSState] = None,
    dual: Optional[DualModel] = None,
) -> SGSResult:
    """Drive the sweep on the reduced dual until its first-order system clears.

    The primal conic variable is recovered from the multiplier trajectory:
    the pre-ascent multiplier plus ``sigma`` times the end-of-sweep dual
    infeasibility, which coincides with the multiplier itself at unit step.
    """
    config = config or SGSConfig()
    config.validate()
    dual = dual or build_dual_model(qp)
    state = start if start is not None else SGSState.zeros(dual)
    if state.work is None or state.work.sigma != config.sigma:
        state.work = SGSWork(dual, config)
    work = state.work

    scale = certificate_scale(qp)
    history: dict = {"k": [], "residual": []}
    stride = config.history_stride()
    if stride:
        history.update({"s": [], "y": [], "w_hat": [], "z": [], "x": []})

    def record(k, res):
        history["k"].append(k)
        history["residual"].append(res)
        if stride and (k % stride == 0 or k == config.max_iter):
            for name, arr in (("s", state.s), ("y", state.y),
                              ("w_hat", state.w_hat), ("z", state.z), ("x", state.x)):
                history[name].append(arr.copy())

    def current_kkt():
        return kkt_residual_dual(dual, state.s, state.y, state.w_hat, state.z, state.x)

    kkt = current_kkt()
    record(0, kkt["norm"])
    status = "max_iter"
    primal_x = state.x.copy()
    if kkt["norm"] <= config.tol * scale:
        status = "converged" if (work.pd_y and work.pd_w) else "uncertified"

    k = 0
    certs = None
    if status == "max_iter":
        for k in range(1, config.max_iter + 1):
            x_old = state.x
            state = sgs_step(dual, config, state)
            feas = dual.feas_residual(state.s, state.y, state.w_hat, state.z)
            primal_x = x_old + config.sigma * feas
            kkt = current_kkt()
            record(k, kkt["norm"])
            if kkt["norm"] <= config.tol * scale:
                status = "converged" if (work.pd_y and work.pd_w) else "uncertified"
                break
            size = math.sqrt(sum(float(v @ v) for v in
                                 (state.s, state.y, state.w_hat, state.z, state.x)))
            if size > config.divergence_factor * scale:
                status = "diverged"
                break
        if state.prev is not None:
            certs = sgs_optimality_certificates(dual, config, state)

    gap = duality_gap(
        qp, primal_x, primal_x, state.s, state.y, dual.w_full(state.w_hat), state.z
    )
    return SGSResult(
        status, state.k, state.s, state.y, state.w_hat,
        dual.w_full(state.w_hat), state.z, state.x, primal_x,
        kkt, gap, certs, kkt["norm"], scale,
        work.pd_y, work.pd_w, config.tau_in_range, history,
    )


# ---------------------------------------------------------------------------
# the sweep as a two-block run (quadratic-free case)
# ---------------------------------------------------------------------------


class SweepBlockSolver:
    """Block-one update hook reproducing the sweep inside the generic engine.

    Only valid when the quadratic term vanishes: the stacked ``(s, y)`` block
    is then updated by the half/full multiplier solves around the slack
    projection, which equals an exact proximal minimization with the
    Gauss-Seidel surrogate matrix exposed as ``s_matrix``.
    """

    def __init__(self, problem: TwoBlockProblem, index: int, config):
        if index != 1:
            raise ConfigError("the sweep hook only builds the first block")
        qp: ConicQP = problem._sweep_qp  # attached by dual_two_block
        if qp.quad is not None:
            raise ConfigError("the sweep hook needs a vanishing quadratic term")
        self.qp = qp
        self.n, self.m = qp.dim, qp.n_eq
        self.sigma = config.sigma
        a_mat = qp.con_mat
        aa = a_mat @ a_mat.T
        scale = 1.0 + float(np.abs(aa).max(initial=0.0))
        lo = float(np.linalg.eigvalsh(aa)[0]) if self.m else 1.0
        if lo > 1e-10 * scale:
            self.s1 = np.zeros((self.m, self.m))
        else:
            lam = power_lambda_max(self.sigma * aa, rel_tol=1e-6) * (1.0 + 1e-6)
            self.s1 = lam * np.eye(self.m) - self.sigma * aa
        y_op = self.sigma * aa + self.s1
        self.y_cho = scipy.linalg.cho_factor(y_op) if self.m else None

        # Gauss-Seidel surrogate: the cross-coupling squeezed through the
        # multiplier stage, plus the explicit multiplier proximal term
        n, m = self.n, self.m
        s_matrix = np.zeros((n + m, n + m))
        if self.m:
            inv_yop = scipy.linalg.cho_solve(self.y_cho, np.eye(m))
            s_matrix[:n, :n] = self.sigma**2 * (a_mat.T @ inv_yop @ a_mat)
            s_matrix[n:, n:] = self.s1
        self.s_matrix = 0.5 * (s_matrix + s_matrix.T)

    def solve(self, v_prev: np.ndarray, q: np.ndarray) -> np.ndarray:
        n, m, sigma = self.n, self.m, self.sigma
        s_prev, y_prev = v_prev[:n], v_prev[n:]
        q_s, q_y = q[:n], q[n:]
        a_mat = self.qp.con_mat

        y_half = (
            scipy.linalg.cho_solve(
                self.y_cho, -q_y - sigma * (a_mat @ s_prev) + self.s1 @ y_prev
            )
            if m else y_prev
        )
        s_new = _project_slack(self.qp, -q_s / sigma - a_mat.T @ y_half)
        y_new = (
            scipy.linalg.cho_solve(
                self.y_cho, -q_y - sigma * (a_mat @ s_new) + self.s1 @ y_prev
            )
            if m else y_half
        )
        return np.concatenate([s_new, y_new])


def dual_two_block(qp: ConicQP) -> TwoBlockProblem:
    """Embed the quadratic-free dual into the generic two-block model.

    Block one stacks the cone slack over the equality multiplier and is
    updated by the sweep hook; block two is the polyhedral-dual term.  The
    coupling constraint is dual feasibility.
    """
    if qp.quad is not None:
        raise InputError("the two-block dual embedding needs a zero quadratic term")
    n, m = qp.dim, qp.n_eq
    if qp.cone == "psd":
        s_fun: SimpleFun = IndicatorPSDCone(qp.space)
    else:
        s_fun = IndicatorBox(BoxSet(np.zeros(n), np.zeros(n)))
    block1 = BlockSpec(
        dim=n + m,
        fun=StackedFun([s_fun, ZeroFun(m)]),
        lin=np.concatenate([np.zeros(n), -qp.con_rhs]),
        solver="factory",
        solver_factory=SweepBlockSolver,
    )
    block2 = BlockSpec(dim=n, fun=ThetaFun(qp.poly))
    adj1 = np.hstack([np.eye(n), qp.con_mat.T])
    adj2 = np.eye(n)
    problem = TwoBlockProblem(block1, block2, adj1, adj2, qp.cost.copy())
    problem._sweep_qp = qp
    return problem
