"""Convergence instrumentation for the two-block solver.

Everything here is built from the run's operator data: the step-size
functions ``s``/``t``, the contraction constants, the three quadratic forms
used by the convergence analysis, per-iteration inequality slacks, and an
empirical linear-rate estimate.  A :class:`DiagnosticsLedger` can be attached
to a solver run to collect one row per iteration and serialize it as CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DomainError, InputError, NumericalError
from .model import KKTPoint, TwoBlockProblem

#: slack floors for the per-iteration inequality checks
COU_TOL = 1e-9
LES11_TOL = 1e-8
B8_TOL = 1e-8
FORM_SAMPLE_TOL = 1e-9
#: a reference point must have this relative residual to anchor comparisons
REFERENCE_TOL = 1e-9

LEDGER_MAGIC = "# spadmm-ledger v1"
LEDGER_COLUMNS = ("k", "R_norm", "theta", "delta", "nu", "cou_slack", "les11_slack", "ratio")


def stau_ttau(tau: float):
    """The two step-size functions controlling the contraction constants.

    ``s(tau) = (5 - tau - 3 min(tau, 1/tau)) / 4`` and
    ``t(tau) = (1 - tau + min(tau, 1/tau)) / 8``, defined for positive ``tau``.
    """
    if not np.isfinite(tau) or tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    m = min(tau, 1.0 / tau)
    return (5.0 - tau - 3.0 * m) / 4.0, (1.0 - tau + m) / 8.0


@dataclass(frozen=True)
class QuadForm:
    """A dense self-adjoint positive-semidefinite form on stacked iterates."""

    id: str
    matrix: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def norm2(self, u: np.ndarray) -> float:
        return float(u @ (self.matrix @ u))

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def max_eig_power(self, rel_tol: float = 1e-8) -> float:
        from .solver import power_lambda_max

        return power_lambda_max(self.matrix, rel_tol=rel_tol)


@dataclass(frozen=True)
class RateConstants:
    """All scalar constants of the contraction analysis.

    ``kappa4``, ``kappa5`` and ``mu`` additionally depend on the error-bound
    modulus estimate ``eta``; ``mu`` is the certified per-step contraction
    factor of the squared weighted distance whenever ``kappa4 > 0``.
    """

    tau: float
    sigma: float
    s_tau: float
    t_tau: float
    kappa1: float
    kappa2: float
    kappa3: float
    kappa: float
    lam_aa: float
    lam_bb: float
    lam_max_m: float
    eta: float
    kappa4: float
    kappa5: float
    mu: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "tau", "sigma", "s_tau", "t_tau", "kappa1", "kappa2", "kappa3",
            "kappa", "lam_aa", "lam_bb", "lam_max_m", "eta", "kappa4",
            "kappa5", "mu",
        )}

    def dump(self) -> str:
        return "\n".join(f"{k} = {v:.17g}" for k, v in self.as_dict().items())


class OperatorBundle:
    """Operator data of one solver run, with the analysis forms cached.

    Stacked iterate order is ``(y, z, x)`` throughout, matching the
    residual map of the two-block model.
    """

    def __init__(
        self,
        adj1: np.ndarray,
        adj2: np.ndarray,
        sigma: float,
        tau: float,
        s_matrix: np.ndarray,
        t_matrix: np.ndarray,
        sigma1: Optional[np.ndarray] = None,
        sigma2: Optional[np.ndarray] = None,
    ):
        self.adj1 = np.asarray(adj1, dtype=float)
        self.adj2 = np.asarray(adj2, dtype=float)
        self.sigma = float(sigma)
        self.tau = float(tau)
        self.n1 = self.adj1.shape[1]
        self.n2 = self.adj2.shape[1]
        self.nx = self.adj1.shape[0]
        self.s_matrix = np.asarray(s_matrix, dtype=float)
        self.t_matrix = np.asarray(t_matrix, dtype=float)
        self.sigma1 = np.zeros((self.n1, self.n1)) if sigma1 is None else np.asarray(sigma1, dtype=float)
        self.sigma2 = np.zeros((self.n2, self.n2)) if sigma2 is None else np.asarray(sigma2, dtype=float)
        if self.sigma <= 0 or self.tau <= 0:
            raise DomainError("sigma and tau must be positive")
        self.sl_y = slice(0, self.n1)
        self.sl_z = slice(self.n1, self.n1 + self.n2)
        self.sl_x = slice(self.n1 + self.n2, self.n1 + self.n2 + self.nx)

    @classmethod
    def from_problem(
        cls,
        problem: TwoBlockProblem,
        config,
        s_matrix: np.ndarray,
        t_matrix: np.ndarray,
        sigma1: Optional[np.ndarray] = None,
        sigma2: Optional[np.ndarray] = None,
    ) -> "OperatorBundle":
        """Defaults the curvature bounds to the blocks' quadratic Hessians."""
        if sigma1 is None:
            sigma1 = problem.block1.hess
        if sigma2 is None:
            sigma2 = problem.block2.hess
        return cls(problem.adj1, problem.adj2, config.sigma, config.tau,
                   s_matrix, t_matrix, sigma1, sigma2)

    # -- scalar constants ---------------------------------------------------

    @cached_property
    def aa_gram(self) -> np.ndarray:
        return self.adj1.T @ self.adj1

    @cached_property
    def bb_gram(self) -> np.ndarray:
        return self.adj2.T @ self.adj2

    @cached_property
    def lam_aa(self) -> float:
        from .solver import power_lambda_max

        return power_lambda_max(self.aa_gram, rel_tol=1e-8)

    @cached_property
    def lam_bb(self) -> float:
        from .solver import power_lambda_max

        return power_lambda_max(self.bb_gram, rel_tol=1e-8)

    @cached_property
    def kappas(self) -> dict:
        s_norm = float(np.abs(np.linalg.eigvalsh(self.s_matrix)).max(initial=0.0))
        t_norm = float(np.abs(np.linalg.eigvalsh(self.t_matrix)).max(initial=0.0))
        k1 = 3.0 * s_norm
        k2 = max(3.0 * self.sigma * self.lam_aa, 2.0 * t_norm)
        k3 = (
            3.0 * (1.0 - self.tau) ** 2 * self.sigma * self.lam_aa
            + 2.0 * (1.0 - self.tau) ** 2 * self.sigma * self.lam_bb
            + 1.0 / self.sigma
        )
        return {"kappa1": k1, "kappa2": k2, "kappa3": k3, "kappa": max(k1, k2, k3)}

    # -- quadratic forms ----------------------------------------------------

    @cached_property
    def ee_gram(self) -> np.ndarray:
        n = self.n1 + self.n2 + self.nx
        e = np.zeros((self.nx, n))
        e[:, self.sl_y] = self.adj1
        e[:, self.sl_z] = self.adj2
        return e.T @ e

    def _block_diag(self, top: np.ndarray, mid: np.ndarray, low_scale: float) -> np.ndarray:
        return scipy.linalg.block_diag(top, mid, low_scale * np.eye(self.nx))

    @cached_property
    def form_h0(self) -> QuadForm:
        kappa = self.kappas["kappa"]
        mat = kappa * self._block_diag(
            self.s_matrix,
            self.t_matrix + self.sigma * self.bb_gram,
            1.0 / (self.tau**2 * self.sigma),
        )
        return QuadForm("H0", 0.5 * (mat + mat.T))

    @cached_property
    def form_m(self) -> QuadForm:
        s_tau, _ = stau_ttau(self.tau)
        mat = self._block_diag(
            self.s_matrix + self.sigma1,
            self.t_matrix + self.sigma2 + self.sigma * self.bb_gram,
            1.0 / (self.tau * self.sigma),
        ) + s_tau * self.sigma * self.ee_gram
        return QuadForm("M", 0.5 * (mat + mat.T))

    @cached_property
    def form_h(self) -> QuadForm:
        _, t_tau = stau_ttau(self.tau)
        mat = self._block_diag(
            self.s_matrix + 0.5 * self.sigma1,
            self.t_matrix + 0.5 * self.sigma2 + self.tau * self.sigma * self.bb_gram,
            4.0 * t_tau / (self.tau**2 * self.sigma),
        ) + t_tau * self.sigma * self.ee_gram
        return QuadForm("H", 0.5 * (mat + mat.T))

    @cached_property
    def form_ee(self) -> QuadForm:
        return QuadForm("EEstar", self.ee_gram)

    # -- norms over stacked iterates -----------------------------------------

    def stack(self, point: KKTPoint) -> np.ndarray:
        return np.concatenate([point.y, point.z, point.x])

    def theta(self, u: KKTPoint, u2: KKTPoint) -> float:
        """Weighted squared distance mixing the multiplier, both blocks and
        the image of the second block through its constraint map."""
        dx = u.x - u2.x
        dy = u.y - u2.y
        dz = u.z - u2.z
        return (
            float(dx @ dx) / (self.tau * self.sigma)
            + float(dy @ (self.s_matrix @ dy))
            + float(dz @ (self.t_matrix @ dz))
            + self.sigma * float(np.linalg.norm(self.adj2 @ dz) ** 2)
        )

    def delta(self, z: np.ndarray, z_prev: np.ndarray) -> float:
        dz = z - z_prev
        coef = self.tau * (1.0 - self.tau + min(self.tau, 1.0 / self.tau)) * self.sigma
        return coef * float(np.linalg.norm(self.adj2 @ dz) ** 2) + float(dz @ (self.t_matrix @ dz))

    def nu(self, u: KKTPoint, u_prev: KKTPoint, u_bar: KKTPoint) -> float:
        dy = u.y - u_prev.y
        ry = u.y - u_bar.y
        rz = u.z - u_bar.z
        return (
            self.delta(u.z, u_prev.z)
            + float(dy @ (self.s_matrix @ dy))
            + 2.0 * float(ry @ (self.sigma1 @ ry))
            + 2.0 * float(rz @ (self.sigma2 @ rz))
        )


def theta_delta_nu(bundle: OperatorBundle, u: KKTPoint, u_prev: KKTPoint, u_bar: KKTPoint):
    """Evaluate the three per-iteration quantities of the descent analysis."""
    return (
        bundle.theta(u, u_bar),
        bundle.delta(u.z, u_prev.z),
        bundle.nu(u, u_prev, u_bar),
    )


def assemble_forms(bundle: OperatorBundle, eta_estimate: float, n_samples: int = 1000):
    """Fill every contraction constant and cross-check the form inequality.

    The operator inequality ``kappa*H >= min(tau, 4 t) * H0 + kappa*t*sigma*EE'``
    is verified on ``n_samples`` deterministic random unit vectors; a
    violation beyond tolerance raises :class:`NumericalError`.
    """
    if not np.isfinite(eta_estimate) or eta_estimate <= 0:
        raise DomainError(f"eta estimate must be positive, got {eta_estimate}")
    s_tau, t_tau = stau_ttau(bundle.tau)
    ks = bundle.kappas
    forms = {
        "H0": bundle.form_h0,
        "M": bundle.form_m,
        "H": bundle.form_h,
        "EEstar": bundle.form_ee,
    }

    gap = (
        ks["kappa"] * forms["H"].matrix
        - min(bundle.tau, 4.0 * t_tau) * forms["H0"].matrix
        - ks["kappa"] * t_tau * bundle.sigma * forms["EEstar"].matrix
    )
    scale = 1.0 + float(np.abs(gap).max(initial=0.0))
    rng = np.random.default_rng(20240517)
    n = gap.shape[0]
    for _ in range(n_samples):
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        slack = float(d @ (gap @ d))
        if slack < -FORM_SAMPLE_TOL * scale:
            raise NumericalError(
                f"form inequality violated on a sampled direction: slack={slack:.3e}"
            )

    lam_m = forms["M"].max_eig_power()
    kappa4 = min(bundle.tau, 4.0 * t_tau) / (eta_estimate**2 * ks["kappa"] * lam_m)
    constants = RateConstants(
        tau=bundle.tau,
        sigma=bundle.sigma,
        s_tau=s_tau,
        t_tau=t_tau,
        kappa1=ks["kappa1"],
        kappa2=ks["kappa2"],
        kappa3=ks["kappa3"],
        kappa=ks["kappa"],
        lam_aa=bundle.lam_aa,
        lam_bb=bundle.lam_bb,
        lam_max_m=lam_m,
        eta=eta_estimate,
        kappa4=kappa4,
        kappa5=1.0 / (1.0 + kappa4),
        mu=(1.0 + kappa4) / (1.0 + 2.0 * kappa4),
    )
    return constants, forms


def check_cou(problem: TwoBlockProblem, bundle: OperatorBundle,
              u_k: KKTPoint, u_k1: KKTPoint) -> float:
    """Slack of the step-versus-residual inequality at one transition.

    Contract: ``|u_new - u_old|^2_{H0} >= |R(u_new)|^2`` whenever ``u_new``
    was produced from ``u_old`` by one solver step; the returned slack is
    left-hand side minus right-hand side.
    """
    du = bundle.stack(u_k1) - bundle.stack(u_k)
    lhs = bundle.form_h0.norm2(du)
    r = problem.residual_map(u_k1.x, u_k1.y, u_k1.z)
    return lhs - float(r @ r)


def _require_reference(problem: TwoBlockProblem, u_bar: KKTPoint) -> None:
    r = float(np.linalg.norm(problem.residual_map(u_bar.x, u_bar.y, u_bar.z)))
    if r > REFERENCE_TOL * problem.residual_scale():
        raise DomainError(
            f"reference point is not certified: residual {r:.3e} exceeds "
            f"{REFERENCE_TOL:.1e} relative"
        )


def check_les11(problem: TwoBlockProblem, bundle: OperatorBundle,
                u_k: KKTPoint, u_k1: KKTPoint, u_bar: KKTPoint,
                z_km1: np.ndarray) -> float:
    """Slack of the one-step decrease of the weighted squared distance.

    Needs the difference history one step further back (``z_km1``), and a
    certified reference anchoring the distance; the slack is right-hand side
    minus left-hand side and should be nonnegative for in-range step sizes.
    """
    _require_reference(problem, u_bar)
    ub = bundle.stack(u_bar)
    m = bundle.form_m
    t = bundle.t_matrix
    dz_new = u_k1.z - u_k.z
    dz_old = u_k.z - z_km1
    du = bundle.stack(u_k1) - bundle.stack(u_k)
    lhs = m.norm2(bundle.stack(u_k1) - ub) + float(dz_new @ (t @ dz_new))
    rhs = (
        m.norm2(bundle.stack(u_k) - ub)
        + float(dz_old @ (t @ dz_old))
        - bundle.form_h.norm2(du)
    )
    return rhs - lhs


def check_b8(problem: TwoBlockProblem, bundle: OperatorBundle,
             u_k: KKTPoint, u_k1: KKTPoint, u_bar: KKTPoint,
             z_km1: np.ndarray) -> float:
    """Slack of the telescoping potential decrease along one transition.

    The potential adds the weighted distance to the reference, the previous
    second-block difference, and a feasibility-gap term; its decrease must
    cover the per-step quantity ``nu`` plus another feasibility term.
    """
    _require_reference(problem, u_bar)
    mt = min(bundle.tau, 1.0 / bundle.tau)
    t = bundle.t_matrix

    def potential(u: KKTPoint, z_prev: np.ndarray) -> float:
        dz = u.z - z_prev
        feas = problem.feas_residual(u.y, u.z)
        return (
            bundle.theta(u, u_bar)
            + float(dz @ (t @ dz))
            + (1.0 - mt) * bundle.sigma * float(feas @ feas)
        )

    feas_new = problem.feas_residual(u_k1.y, u_k1.z)
    drop = (
        bundle.nu(u_k1, u_k, u_bar)
        + (1.0 - bundle.tau + mt) * bundle.sigma * float(feas_new @ feas_new)
    )
    return potential(u_k, z_km1) - potential(u_k1, u_k.z) - drop


def check_pd_equiv(bundle: OperatorBundle, tol: float = 1e-10) -> dict:
    """Positive-definiteness consistency of the analysis forms.

    Computes the minimum eigenvalues of the two regularized block operators
    and of the forms ``M`` and ``H``; the three positivity verdicts (both
    blocks / M / H) must agree, else a :class:`NumericalError` is raised.
    """
    block1 = bundle.sigma1 + bundle.s_matrix + bundle.sigma * bundle.aa_gram
    block2 = bundle.sigma2 + bundle.t_matrix + bundle.sigma * bundle.bb_gram
    eigs = {
        "block1": float(np.linalg.eigvalsh(0.5 * (block1 + block1.T))[0]),
        "block2": float(np.linalg.eigvalsh(0.5 * (block2 + block2.T))[0]),
        "M": bundle.form_m.min_eig(),
        "H": bundle.form_h.min_eig(),
    }
    scales = {
        "block1": 1.0 + float(np.abs(block1).max(initial=0.0)),
        "block2": 1.0 + float(np.abs(block2).max(initial=0.0)),
        "M": 1.0 + float(np.abs(bundle.form_m.matrix).max(initial=0.0)),
        "H": 1.0 + float(np.abs(bundle.form_h.matrix).max(initial=0.0)),
    }
    positive = {k: eigs[k] > tol * scales[k] for k in eigs}
    verdicts = {
        "blocks": positive["block1"] and positive["block2"],
        "M": positive["M"],
        "H": positive["H"],
    }
    agree = len(set(verdicts.values())) == 1
    if not agree:
        raise NumericalError(f"positivity verdicts disagree: {verdicts} (eigs {eigs})")
    return {"min_eigs": eigs, "verdicts": verdicts, "agree": agree}


def empirical_rate(ratios, tail: int = 100):
    """Geometric-mean contraction factor over the trajectory tail.

    ``ratios`` are per-step quotients of the weighted squared distance;
    non-finite entries (undefined 0/0 steps) are dropped.  Returns the
    filtered ratios and the tail rate (nan when nothing is measurable).
    """
    arr = np.asarray(ratios, dtype=float)
    arr = arr[np.isfinite(arr) & (arr > 0)]
    if arr.size == 0:
        return arr, float("nan")
    tail_arr = arr[-tail:]
    return arr, float(np.exp(np.mean(np.log(tail_arr))))


class DiagnosticsLedger:
    """Per-iteration instrumentation attached to a solver run.

    Records the residual norm, the descent quantities, both inequality
    slacks and the distance-contraction ratio for every transition.  Columns
    that need a reference point are ``nan`` when none was supplied.
    """

    def __init__(self, reference: Optional[KKTPoint] = None,
                 sigma1: Optional[np.ndarray] = None,
                 sigma2: Optional[np.ndarray] = None):
        self.reference = reference
        self._sigma1 = sigma1
        self._sigma2 = sigma2
        self.problem: Optional[TwoBlockProblem] = None
        self.bundle: Optional[OperatorBundle] = None
        self.rows: list = []
        self.status: Optional[str] = None
        self.final: Optional[KKTPoint] = None
        self.scale: float = 1.0
        self.tau_in_range: bool = True
        self._z_km1: Optional[np.ndarray] = None
        self._phi_prev: float = float("nan")
        self.ref_dist_norms: list = []

    # -- solver hooks --------------------------------------------------------

    def bind(self, problem: TwoBlockProblem, config, s_matrix, t_matrix) -> None:
        self.problem = problem
        self.bundle = OperatorBundle.from_problem(
            problem, config, s_matrix, t_matrix, self._sigma1, self._sigma2
        )
        self.scale = problem.residual_scale()
        self.tau_in_range = config.tau_in_range
        if self.reference is not None:
            _require_reference(problem, self.reference)
        self.rows = []
        self._z_km1 = None
        self._phi_prev = float("nan")
        self.ref_dist_norms = []

    def record(self, k: int, prev: KKTPoint, new: KKTPoint) -> None:
        bundle, problem = self.bundle, self.problem
        r = problem.residual_map(new.x, new.y, new.z)
        r_norm = float(np.linalg.norm(r))
        cou = check_cou(problem, bundle, prev, new)

        theta = delta = nu = les11 = ratio = float("nan")
        delta = bundle.delta(new.z, prev.z)
        if self.reference is not None:
            theta = bundle.theta(new, self.reference)
            nu = bundle.nu(new, prev, self.reference)
            ub = bundle.stack(self.reference)
            dz = new.z - prev.z
            phi = bundle.form_m.norm2(bundle.stack(new) - ub) + float(
                dz @ (bundle.t_matrix @ dz)
            )
            if self._z_km1 is not None:
                les11 = check_les11(problem, bundle, prev, new, self.reference, self._z_km1)
                if self._phi_prev > 0 and np.isfinite(self._phi_prev):
                    ratio = phi / self._phi_prev
            self._phi_prev = phi
            self.ref_dist_norms.append(
                float(np.linalg.norm(bundle.stack(new) - ub))
            )
        self._z_km1 = prev.z.copy()
        self.rows.append({
            "k": k, "R_norm": r_norm, "theta": theta, "delta": delta,
            "nu": nu, "cou_slack": cou, "les11_slack": les11, "ratio": ratio,
        })

    def finalize(self, final_point: KKTPoint, status: str) -> None:
        self.final = final_point
        self.status = status

    # -- post-processing -----------------------------------------------------

    def column(self, name: str) -> np.ndarray:
        if name not in LEDGER_COLUMNS:
            raise InputError(f"unknown ledger column {name!r}")
        return np.array([row[name] for row in self.rows], dtype=float)

    def eta_estimate(self, tail: int = 100) -> float:
        """Largest tail quotient of reference distance over residual norm."""
        if self.reference is None:
            raise DomainError("eta estimate needs a ledger with a reference point")
        dists = np.asarray(self.ref_dist_norms[-tail:], dtype=float)
        rnorms = self.column("R_norm")[-tail:]
        mask = rnorms > 0
        if not mask.any():
            return float("nan")
        return float((dists[mask] / rnorms[mask]).max())

    def rate_summary(self, tail: int = 100):
        return empirical_rate(self.column("ratio"), tail=tail)

    # -- serialization ---------------------------------------------------------

    def write_csv(self, path: str) -> None:
        lines = [LEDGER_MAGIC]
        lines.append(f"# tau={self.bundle.tau:.17g}")
        lines.append(f"# sigma={self.bundle.sigma:.17g}")
        lines.append(f"# tau_in_range={int(self.tau_in_range)}")
        lines.append(f"# scale={self.scale:.17g}")
        lines.append(",".join(LEDGER_COLUMNS))
        for row in self.rows:
            fields = [f"{int(row['k'])}"]
            fields += [f"{float(row[c]):.17g}" for c in LEDGER_COLUMNS[1:]]
            lines.append(",".join(fields))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def read_ledger_csv(path: str) -> dict:
    """Parse a ledger CSV back into metadata and column arrays.

    Raises :class:`InputError` on a bad magic line, malformed metadata,
    wrong column sets, or non-numeric fields.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read ledger file: {exc}") from exc
    if not raw or raw[0].strip() != LEDGER_MAGIC:
        raise InputError("not a ledger file: bad magic line")
    meta = {}
    idx = 1
    while idx < len(raw) and raw[idx].startswith("#"):
        body = raw[idx][1:].strip()
        if "=" not in body:
            raise InputError(f"malformed metadata line: {raw[idx]!r}")
        key, val = body.split("=", 1)
        try:
            meta[key.strip()] = float(val)
        except ValueError as exc:
            raise InputError(f"non-numeric metadata value in {raw[idx]!r}") from exc
        idx += 1
    if idx >= len(raw) or tuple(raw[idx].split(",")) != LEDGER_COLUMNS:
        raise InputError("missing or wrong ledger column header")
    idx += 1
    rows = []
    for line in raw[idx:]:
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(LEDGER_COLUMNS):
            raise InputError(f"wrong field count in ledger row: {line!r}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise InputError(f"non-numeric field in ledger row: {line!r}") from exc
    data = np.asarray(rows, dtype=float).reshape(-1, len(LEDGER_COLUMNS))
    columns = {name: data[:, j] for j, name in enumerate(LEDGER_COLUMNS)}
    for key in ("tau", "sigma", "tau_in_range", "scale"):
        if key not in meta:
            raise InputError(f"ledger metadata missing {key!r}")
    return {"meta": meta, "columns": columns}
