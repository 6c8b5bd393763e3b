"""Second-order analysis of certified conic-QP solutions.

The entry point :func:`certify_kkt` produces a :class:`CertifiedKKT`: a
numerically certified first-order point together with its activity
structure — the eigenvalue split of the complementary matrix pair, the box
activity codes, and multiplier-uniqueness verdicts for both the primal and
the dual side.

On top of a certificate, four condition checks are provided:

* :func:`sosc_primal` / :func:`sosc_dual` — positivity of a curvature form
  (the quadratic term plus a projection-curvature term built from the
  complementary pair) over the corresponding critical cone;
* :func:`srcq_primal` / :func:`srcq_dual` — covering conditions asking a sum
  of tangent-cone slices, a polyhedral cone and operator ranges to fill the
  whole target space;
* :func:`dd_system_test` — triviality of the kernel of the directional
  derivative of the first-order residual map, the computational proxy for
  local single-valued stability of the solution mapping;
* :func:`thm55_report` — evaluates all of the above and cross-checks the
  verdicts, which are mutually equivalent for this problem class.

Every check runs in one of two modes.  When the certificate sits in the
*subspace regime* — strict complementarity of the matrix pair (empty zero
block) and no weakly active box coordinate — all cones involved are linear
subspaces and each verdict is an exact rank or eigenvalue computation.
Outside the regime the checks fall back to sound one-sided tests (a verdict
of ``holds`` or ``fails`` is still trustworthy) and report ``undetermined``
whenever neither side can be certified.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import matcone, polyset
from .errors import DomainError, InputError, NumericalError
from .matcone import SpectralTriple
from .model import (
    BoxPolyFun,
    ConicQP,
    DualModel,
    build_dual_model,
    kkt_residual_dual,
    kkt_residual_primal,
    smat,
    svec,
)
from .sgs import SGSConfig, run_sgs_spadmm

__all__ = [
    "HOLDS",
    "FAILS",
    "UNDETERMINED",
    "EXACT_SUBSPACE",
    "SAMPLED",
    "ConditionVerdict",
    "CertifiedKKT",
    "certify_kkt",
    "sosc_primal",
    "sosc_dual",
    "srcq_primal",
    "srcq_dual",
    "dd_system_test",
    "thm55_report",
    "report_to_json",
    "sosc_primal_value",
    "sosc_dual_value",
    "dd_residual",
    "multiplier_eq_residual",
]

HOLDS = "holds"
FAILS = "fails"
UNDETERMINED = "undetermined"
EXACT_SUBSPACE = "exact-subspace"
SAMPLED = "sampled"

#: rank / eigenvalue verdict threshold, multiplied by the data scale
RANK_TOL = 1e-8
#: replayed witnesses must satisfy their defining equations to this precision
WITNESS_TOL = 1e-9
#: directions drawn when hunting for a violating direction outside the regime
SAMPLE_COUNT = 10_000
_SAMPLE_SEED = 20240517
#: enumerate piecewise branches exhaustively up to 2**_BRANCH_CAP patterns
_BRANCH_CAP = 9


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


@dataclass
class ConditionVerdict:
    """Outcome of one condition check.

    ``status`` is ``holds``, ``fails`` or ``undetermined``; ``method`` records
    whether the verdict came from an exact subspace computation or from the
    conservative / sampled fallback.  A ``fails`` verdict always carries a
    ``witness`` dictionary whose entries re-violate the defining condition
    when replayed.
    """

    status: str
    method: str
    witness: Optional[dict] = None
    reason: str = ""

    @property
    def determined(self) -> bool:
        return self.status != UNDETERMINED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "method": self.method,
            "reason": self.reason,
            "witness": _jsonable(self.witness),
        }


def _jsonable(obj):
    if obj is None:
        return None
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# small linear-algebra helpers
# ---------------------------------------------------------------------------


def _unit_columns(mat: np.ndarray) -> np.ndarray:
    """Copy of ``mat`` with every nonzero column scaled to unit length."""
    if mat.size == 0:
        return mat
    out = mat.copy()
    norms = np.linalg.norm(out, axis=0)
    keep = norms > 0
    out[:, keep] /= norms[keep]
    return out


def _numeric_rank(mat: np.ndarray, cut: float) -> int:
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(_unit_columns(mat), compute_uv=False)
    return int(np.sum(sv > cut))


def _null_basis(mat: np.ndarray, dim: int, cut: float) -> np.ndarray:
    """Orthonormal basis of ``{v: mat v = 0}`` with an absolute cutoff."""
    if mat.size == 0:
        return np.eye(dim)
    u, sv, vt = np.linalg.svd(mat)
    rank = int(np.sum(sv > cut))
    return vt[rank:].T


def _left_null_direction(mat: np.ndarray, dim: int) -> np.ndarray:
    """A unit vector orthogonal to every column of ``mat``."""
    if mat.size == 0:
        e = np.zeros(dim)
        e[0] = 1.0
        return e
    u, sv, _ = np.linalg.svd(_unit_columns(mat))
    # the column of u past the numerical rank is orthogonal to range(mat)
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max(initial=0.0))))
    return u[:, min(rank, dim - 1)]


# ---------------------------------------------------------------------------
# eigenbasis bookkeeping for the matrix block
# ---------------------------------------------------------------------------


@dataclass
class _Frame:
    """Packed-coordinate rotation into the eigenbasis of the pair matrix.

    ``rot`` is orthogonal; column ``k`` is the packed form of
    ``P E_k P'`` where ``E_k`` runs over the packed unit basis in eigen
    coordinates.  ``ii``/``jj`` give the (row, column) index pair of each
    packed coordinate and ``lab`` labels each eigenvector as positive (0),
    zero (1) or negative (2).
    """

    rot: np.ndarray
    ii: np.ndarray
    jj: np.ndarray
    lab: np.ndarray

    def mask(self, blocks: Sequence[Tuple[int, int]]) -> np.ndarray:
        """Boolean mask over packed coordinates hitting any listed block."""
        out = np.zeros(self.ii.size, dtype=bool)
        a = self.lab[self.ii]
        b = self.lab[self.jj]
        for u, v in blocks:
            out |= (a == u) & (b == v)
            out |= (a == v) & (b == u)
        return out

    def rows(self, blocks) -> np.ndarray:
        """Constraint rows forcing the listed eigen-blocks to vanish."""
        return self.rot[:, self.mask(blocks)].T

    def cols(self, blocks) -> np.ndarray:
        """Orthonormal columns spanning the listed eigen-blocks."""
        return self.rot[:, self.mask(blocks)]


def _pair_indices(p: int) -> Tuple[np.ndarray, np.ndarray]:
    iu = np.triu_indices(p)
    return iu[0], iu[1]


def _conjugation_basis(cols: np.ndarray) -> np.ndarray:
    """Packed images of the packed unit basis conjugated by ``cols``.

    For a ``p x r`` matrix with orthonormal columns the result has
    orthonormal columns spanning ``{cols M cols': M symmetric r x r}`` in
    packed coordinates.
    """
    p, r = cols.shape
    ii, jj = _pair_indices(r)
    out = np.zeros((p * (p + 1) // 2, ii.size))
    for k in range(ii.size):
        i, j = int(ii[k]), int(jj[k])
        e = np.zeros((r, r))
        if i == j:
            e[i, i] = 1.0
        else:
            e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
        out[:, k] = svec(matcone.symmetrize(cols @ e @ cols.T))
    return out


def _build_frame(triple: SpectralTriple) -> _Frame:
    p = triple.dim
    ii, jj = _pair_indices(p)
    lab = np.empty(p, dtype=int)
    lab[triple.alpha] = 0
    lab[triple.beta] = 1
    lab[triple.gamma] = 2
    rot = _conjugation_basis(triple.basis)
    return _Frame(rot=rot, ii=ii, jj=jj, lab=lab)


def _curvature_matrix(space, outer: np.ndarray, pinv: np.ndarray) -> np.ndarray:
    """Packed matrix of the form ``d -> <outer, smat(d) pinv smat(d)>``."""
    n = space.dim
    out = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        d = smat(e)
        m = outer @ d @ pinv
        out[:, j] = svec(0.5 * (m + m.T))
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# the certificate
# ---------------------------------------------------------------------------


@dataclass
class CertifiedKKT:
    """A numerically certified first-order point with activity structure.

    The variables are the primal conic variable ``x``, its polyhedral
    duplicate ``u``, the cone slack ``s``, the equality multiplier ``y``, the
    polyhedral multiplier ``z`` and the reduced quadratic coordinates
    ``w_hat``.  ``fp``/``fd`` hold the named pieces of the primal and dual
    first-order residual maps; the certificate is ``ok`` when both total
    norms and the complementarity gap are below ``tol`` times the data scale.

    ``triple_xs`` is the eigen-decomposition of ``x - s`` (positive block =
    support of ``x``, negative block = support of ``s``), ``triple_sx`` of
    its negation; ``box_codes`` classify each box coordinate of ``(u, z)``.
    ``lambda_p``/``lambda_d`` are multiplier-uniqueness verdicts and
    ``subspace_regime`` flags strict complementarity on both parts.
    """

    qp: ConicQP
    x: np.ndarray
    u: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w_hat: np.ndarray
    fp: dict
    fd: dict
    comp: float
    scale: float
    ok: bool
    reason: str
    solve_status: str
    iterations: int
    tol: float
    triple_xs: Optional[SpectralTriple] = None
    triple_sx: Optional[SpectralTriple] = None
    box_codes: Optional[List[str]] = None
    code_tol: float = polyset.ACTIVE_TOL
    lambda_p: Optional[ConditionVerdict] = None
    lambda_d: Optional[ConditionVerdict] = None
    subspace_regime: bool = False
    dual: Optional[DualModel] = field(default=None, repr=False)
    _frame: Optional[_Frame] = field(default=None, repr=False)

    @property
    def fp_norm(self) -> float:
        return self.fp["norm"]

    @property
    def fd_norm(self) -> float:
        return self.fd["norm"]

    @property
    def rel_residual(self) -> float:
        return max(self.fp_norm, self.fd_norm) / self.scale

    @property
    def box(self) -> polyset.BoxSet:
        return self.qp.poly.box

    @property
    def dim(self) -> int:
        return self.qp.dim

    def x_matrix(self) -> np.ndarray:
        return self.qp.space.to_matrix(self.x)

    def s_matrix(self) -> np.ndarray:
        return self.qp.space.to_matrix(self.s)

    def x_pinv_matrix(self) -> np.ndarray:
        """Pseudo-inverse of the positive part of the pair matrix."""
        t = self.triple_xs
        cols = t.part(t.alpha)
        vals = t.values[t.alpha]
        return (cols / vals) @ cols.T

    def s_pinv_matrix(self) -> np.ndarray:
        """Pseudo-inverse of the negated negative part of the pair matrix."""
        t = self.triple_xs
        cols = t.part(t.gamma)
        vals = -t.values[t.gamma]
        return (cols / vals) @ cols.T

    def frame(self) -> Optional[_Frame]:
        if self.qp.cone != "psd":
            return None
        if self._frame is None:
            self._frame = _build_frame(self.triple_xs)
        return self._frame

    def strict_active(self) -> np.ndarray:
        """Coordinates whose critical-cone code pins the direction to zero."""
        return np.array([c == polyset.ZERO for c in self.box_codes], dtype=bool)

    def weak_active(self) -> np.ndarray:
        return np.array(
            [c in (polyset.NONNEG, polyset.NONPOS) for c in self.box_codes],
            dtype=bool,
        )

    def summary(self) -> dict:
        out = {
            "ok": self.ok,
            "reason": self.reason,
            "solve_status": self.solve_status,
            "iterations": self.iterations,
            "fp_norm": self.fp_norm,
            "fd_norm": self.fd_norm,
            "complementarity": self.comp,
            "scale": self.scale,
            "subspace_regime": self.subspace_regime,
            "box_codes": self.box_codes,
        }
        if self.triple_xs is not None:
            out["pair_split"] = {
                "positive": int(self.triple_xs.alpha.size),
                "zero": int(self.triple_xs.beta.size),
                "negative": int(self.triple_xs.gamma.size),
            }
        if self.lambda_p is not None:
            out["lambda_p"] = self.lambda_p.to_dict()
            out["lambda_d"] = self.lambda_d.to_dict()
        return out


def _score_point(qp, dual, x, u, s, y, w_hat, z):
    fp = kkt_residual_primal(qp, x, u, y, z)
    fd = kkt_residual_dual(dual, s, y, w_hat, z, x)
    return fp, fd, max(fp["norm"], fd["norm"])


def _polish(qp: ConicQP, dual: DualModel, x, s, y, z, detect_tol: float):
    """One least-squares refinement on the detected active manifold.

    Pins the conic variable to the span of its detected positive
    eigenvectors, the slack to the detected negative span, supports the
    polyhedral multiplier on the detected active coordinates, and solves the
    remaining linear first-order equations in the least-squares sense.
    """
    n, m = qp.dim, qp.n_eq
    box = qp.poly.box
    lower, upper = box.lower, box.upper
    lo_tol = detect_tol * (1.0 + np.abs(np.where(np.isfinite(lower), lower, 0.0)))
    hi_tol = detect_tol * (1.0 + np.abs(np.where(np.isfinite(upper), upper, 0.0)))
    at_lo = np.isfinite(lower) & (np.abs(x - lower) <= lo_tol)
    at_hi = np.isfinite(upper) & (np.abs(x - upper) <= hi_tol) & ~at_lo
    active = at_lo | at_hi
    bound = np.where(at_lo, np.where(np.isfinite(lower), lower, 0.0),
                     np.where(np.isfinite(upper), upper, 0.0))

    if qp.cone == "psd":
        pair = eig = matcone.eig_sym(
            qp.space.to_matrix(x) - qp.space.to_matrix(s),
            zero_tol=max(matcone.DEFAULT_ZERO_TOL, detect_tol),
        )
        basis_x = _conjugation_basis(pair.part(pair.alpha))
        basis_s = _conjugation_basis(pair.part(pair.gamma))
    else:
        basis_x = np.eye(n)
        basis_s = np.zeros((n, 0))

    kx, ks = basis_x.shape[1], basis_s.shape[1]
    act_idx = np.flatnonzero(active)
    ka = act_idx.size
    quad = qp.quad if qp.quad is not None else np.zeros((n, n))
    sel = np.zeros((ka, n))
    sel[np.arange(ka), act_idx] = 1.0

    rows = n + m + ka
    lhs = np.zeros((rows, kx + ks + m + ka))
    rhs = np.zeros(rows)
    # stationarity: Q x - A' y - z - s = -cost
    lhs[:n, :kx] = quad @ basis_x
    lhs[:n, kx:kx + ks] = -basis_s
    lhs[:n, kx + ks:kx + ks + m] = -qp.con_mat.T
    lhs[:n, kx + ks + m:] = -sel.T
    rhs[:n] = -qp.cost
    # equality constraints
    lhs[n:n + m, :kx] = qp.con_mat @ basis_x
    rhs[n:n + m] = qp.con_rhs
    # pin active coordinates to their bounds
    lhs[n + m:, :kx] = sel @ basis_x
    rhs[n + m:] = bound[act_idx]

    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    xh = basis_x @ sol[:kx]
    sh = basis_s @ sol[kx:kx + ks] if ks else np.zeros(n)
    yh = sol[kx + ks:kx + ks + m]
    zh = sel.T @ sol[kx + ks + m:]
    wh = dual.basis.T @ xh if dual.rank else np.zeros(0)
    return xh, sh, yh, zh, wh


def certify_kkt(
    qp: ConicQP,
    tol: float = 1e-7,
    config: Optional[SGSConfig] = None,
) -> CertifiedKKT:
    """Solve, refine and certify a first-order point of ``qp``.

    Runs the dual sweep solver, applies one active-manifold least-squares
    refinement, keeps whichever point has the smaller worst residual, and
    evaluates the certificate invariants.  When they hold the activity
    structure and the multiplier-uniqueness verdicts are attached; otherwise
    the certificate is returned with ``ok=False`` and a reason.

    Only box polyhedral terms are supported; other terms raise
    :class:`InputError`.
    """
    if not isinstance(qp.poly, BoxPolyFun):
        raise InputError(
            "second-order analysis supports box polyhedral terms only"
        )
    dual = build_dual_model(qp)
    if config is None:
        config = SGSConfig(sigma=1.0, tau=1.0, tol=1e-11, max_iter=60000)
    result = run_sgs_spadmm(qp, config, dual=dual)
    if result.status == "diverged":
        raise NumericalError("solver diverged; nothing to certify")

    x, u = result.x, result.x
    s, y, z, w_hat = result.s, result.y, result.z, result.w_hat
    fp, fd, err = _score_point(qp, dual, x, u, s, y, w_hat, z)
    try:
        det = max(1e-6, 10.0 * err / fp["scale"])
        xh, sh, yh, zh, wh = _polish(qp, dual, x, s, y, z, detect_tol=det)
        fp2, fd2, err2 = _score_point(qp, dual, xh, xh, sh, yh, wh, zh)
        if err2 < err:
            x, u, s, y, z, w_hat = xh, xh, sh, yh, zh, wh
            fp, fd, err = fp2, fd2, err2
    except np.linalg.LinAlgError:
        pass

    scale = fp["scale"]
    comp = abs(float(x @ s))
    failures = []
    if fp["norm"] > tol * scale:
        failures.append(f"primal residual {fp['norm']:.3e}")
    if fd["norm"] > tol * scale:
        failures.append(f"dual residual {fd['norm']:.3e}")
    if comp > tol * scale:
        failures.append(f"complementarity gap {comp:.3e}")
    ok = not failures
    reason = "" if ok else (
        "certificate invariants violated: " + ", ".join(failures)
        + f" (threshold {tol * scale:.3e}, solver status {result.status})"
    )

    cert = CertifiedKKT(
        qp=qp, x=x, u=u, s=s, y=y, z=z, w_hat=w_hat,
        fp=fp, fd=fd, comp=comp, scale=scale, ok=ok, reason=reason,
        solve_status=result.status, iterations=result.iterations, tol=tol,
        dual=dual,
    )
    if not ok:
        return cert

    rel = cert.rel_residual
    eig_tol = max(matcone.DEFAULT_ZERO_TOL, 100.0 * rel)
    cert.code_tol = max(polyset.ACTIVE_TOL, 1e3 * rel)
    if qp.cone == "psd":
        xm, sm = cert.x_matrix(), cert.s_matrix()
        cert.triple_xs = matcone.eig_sym(xm - sm, zero_tol=eig_tol)
        cert.triple_sx = matcone.eig_sym(sm - xm, zero_tol=eig_tol)
    try:
        cert.box_codes = polyset.critical_cone_codes(
            cert.box, cert.u, cert.z, tol=cert.code_tol
        )
    except DomainError as exc:
        cert.box_codes = None
        cert.lambda_p = ConditionVerdict(
            UNDETERMINED, SAMPLED, reason=f"box activity unclassifiable: {exc}"
        )
        cert.lambda_d = ConditionVerdict(
            UNDETERMINED, SAMPLED, reason=f"box activity unclassifiable: {exc}"
        )
        return cert

    beta_empty = qp.cone != "psd" or cert.triple_xs.beta.size == 0
    no_weak = not cert.weak_active().any()
    cert.subspace_regime = beta_empty and no_weak
    cert.lambda_p = _lambda_p_verdict(cert)
    cert.lambda_d = _lambda_d_verdict(cert)
    return cert


def _require_cert(cert: CertifiedKKT) -> None:
    if not cert.ok:
        raise InputError("analysis needs a certified point: " + cert.reason)
    if cert.box_codes is None:
        raise InputError(
            "analysis needs a classified certificate: " + cert.lambda_p.reason
        )


# ---------------------------------------------------------------------------
# multiplier uniqueness
# ---------------------------------------------------------------------------


def _gamma_face_basis(cert: CertifiedKKT) -> np.ndarray:
    """Packed span of slacks supported on the negative eigenvector block."""
    if cert.qp.cone != "psd":
        return np.zeros((cert.dim, 0))
    t = cert.triple_xs
    return _conjugation_basis(t.part(t.gamma))


def _alpha_face_basis(cert: CertifiedKKT) -> np.ndarray:
    """Packed span of conic variables supported on the positive block."""
    if cert.qp.cone != "psd":
        return np.eye(cert.dim)
    t = cert.triple_xs
    return _conjugation_basis(t.part(t.alpha))


def multiplier_eq_residual(cert: CertifiedKKT, d_s, d_y, d_z) -> float:
    """Residual of the multiplier feasibility direction equation.

    A two-sided feasible multiplier direction ``(d_s, d_y, d_z)`` must keep
    the stationarity identity, i.e. satisfy ``d_s + A' d_y + d_z = 0``.
    """
    return float(np.linalg.norm(d_s + cert.qp.con_mat.T @ d_y + d_z))


def _lambda_p_verdict(cert: CertifiedKKT) -> ConditionVerdict:
    """Uniqueness of the multiplier tuple for the primal problem.

    Directions that stay in the multiplier set two-sidedly consist of a
    slack moving inside the span of the negative eigenvector block, a free
    equality multiplier move, and polyhedral multiplier moves supported on
    coordinates pinned by the critical cone.  A nonzero kernel of the
    stationarity equation over these directions certifies non-uniqueness;
    outside the subspace regime a trivial kernel is not conclusive because
    one-sided directions are not searched.
    """
    n, m = cert.dim, cert.qp.n_eq
    bg = _gamma_face_basis(cert)
    strict = np.flatnonzero(cert.strict_active())
    e_strict = np.zeros((n, strict.size))
    e_strict[strict, np.arange(strict.size)] = 1.0
    mat = np.hstack([bg, cert.qp.con_mat.T, e_strict])
    cut = RANK_TOL * max(1.0, cert.scale)
    kern = _null_basis(mat, mat.shape[1], cut)
    method = EXACT_SUBSPACE if cert.subspace_regime else SAMPLED
    if kern.shape[1] == 0:
        if cert.subspace_regime:
            return ConditionVerdict(HOLDS, method, reason="multiplier set is a singleton")
        return ConditionVerdict(
            UNDETERMINED, method,
            reason="no two-sided multiplier direction found, but one-sided "
                   "directions exist outside the subspace regime",
        )
    vec = kern[:, 0]
    kg = bg.shape[1]
    wit = {
        "d_s": bg @ vec[:kg],
        "d_y": vec[kg:kg + m],
        "d_z": e_strict @ vec[kg + m:],
    }
    wit["equation_residual"] = multiplier_eq_residual(
        cert, wit["d_s"], wit["d_y"], wit["d_z"]
    )
    wit["kernel_dim"] = kern.shape[1]
    return ConditionVerdict(
        FAILS, method, witness=wit,
        reason="a two-sided line of multipliers exists",
    )


def _lambda_d_verdict(cert: CertifiedKKT) -> ConditionVerdict:
    """Uniqueness of the multiplier of the dual problem.

    The multiplier coincides with the primal conic variable; two-sided
    feasible moves live in the span of the positive eigenvector block, stay
    in the kernel of the constraint map and of the quadratic term, and
    vanish on every bound-active coordinate.
    """
    ba = _alpha_face_basis(cert)
    active = np.array([c != polyset.FREE for c in cert.box_codes], dtype=bool)
    rows = [cert.qp.con_mat @ ba]
    if cert.qp.quad is not None:
        rows.append(cert.qp.quad @ ba)
    if active.any():
        rows.append(ba[active, :])
    mat = np.vstack(rows) if rows else np.zeros((0, ba.shape[1]))
    cut = RANK_TOL * max(1.0, cert.scale)
    kern = _null_basis(mat, ba.shape[1], cut)
    method = EXACT_SUBSPACE if cert.subspace_regime else SAMPLED
    if kern.shape[1] == 0:
        if cert.subspace_regime:
            return ConditionVerdict(HOLDS, method, reason="multiplier set is a singleton")
        return ConditionVerdict(
            UNDETERMINED, method,
            reason="no two-sided multiplier direction found, but one-sided "
                   "directions exist outside the subspace regime",
        )
    d_x = ba @ kern[:, 0]
    wit = {
        "d_x": d_x,
        "constraint_residual": float(np.linalg.norm(cert.qp.con_mat @ d_x)),
        "quad_residual": float(np.linalg.norm(cert.qp.quad_apply(d_x))),
        "kernel_dim": kern.shape[1],
    }
    return ConditionVerdict(
        FAILS, method, witness=wit,
        reason="a two-sided line of multipliers exists",
    )


# ---------------------------------------------------------------------------
# curvature forms over critical cones
# ---------------------------------------------------------------------------


def sosc_primal_value(cert: CertifiedKKT, d: np.ndarray) -> float:
    """Curvature form of the primal problem at a direction ``d``."""
    d = np.asarray(d, dtype=float)
    val = float(d @ cert.qp.quad_apply(d))
    if cert.qp.cone == "psd":
        dm = smat(d)
        val += 2.0 * float(
            np.sum(cert.s_matrix() * (dm @ cert.x_pinv_matrix() @ dm))
        )
    return val


def sosc_dual_value(cert: CertifiedKKT, d_s: np.ndarray, d_w: np.ndarray) -> float:
    """Curvature form of the dual problem at a direction ``(d_s, d_w)``."""
    d_w = np.asarray(d_w, dtype=float)
    val = float(d_w @ cert.qp.quad_apply(d_w))
    if cert.qp.cone == "psd":
        dm = smat(np.asarray(d_s, dtype=float))
        val += 2.0 * float(
            np.sum(cert.x_matrix() * (dm @ cert.s_pinv_matrix() @ dm))
        )
    return val


def _primal_cone_rows(cert: CertifiedKKT) -> np.ndarray:
    """Equality rows of the (superset of the) primal critical cone."""
    n = cert.dim
    parts = []
    fr = cert.frame()
    if fr is not None:
        parts.append(fr.rows([(2, 2), (2, 1)]))
    parts.append(cert.qp.con_mat)
    strict = np.flatnonzero(cert.strict_active())
    if strict.size:
        sel = np.zeros((strict.size, n))
        sel[np.arange(strict.size), strict] = 1.0
        parts.append(sel)
    parts = [p for p in parts if p.shape[0]]
    return np.vstack(parts) if parts else np.zeros((0, n))


def _member_primal_cone(cert: CertifiedKKT, d: np.ndarray, tol: float) -> bool:
    if cert.qp.cone == "psd" and not matcone.in_critical_cone_psd(
        smat(d), cert.triple_xs, tol=tol
    ):
        return False
    weak = cert.weak_active()
    for i in np.flatnonzero(weak):
        code = cert.box_codes[i]
        if code == polyset.NONNEG and d[i] < -tol:
            return False
        if code == polyset.NONPOS and d[i] > tol:
            return False
    return True


def sosc_primal(cert: CertifiedKKT) -> ConditionVerdict:
    """Positivity of the primal curvature form on the primal critical cone.

    Requires the primal multiplier set to be certified a singleton; when it
    is not, the condition as posed here does not apply and the verdict is
    ``undetermined``.
    """
    _require_cert(cert)
    if cert.lambda_p.status != HOLDS:
        return ConditionVerdict(
            UNDETERMINED, cert.lambda_p.method,
            reason="multiplier uniqueness not established: " + cert.lambda_p.reason,
        )
    n = cert.dim
    quad = cert.qp.quad if cert.qp.quad is not None else np.zeros((n, n))
    form = quad.copy()
    if cert.qp.cone == "psd":
        form = form + 2.0 * _curvature_matrix(
            cert.qp.space, cert.s_matrix(), cert.x_pinv_matrix()
        )
    cut = RANK_TOL * max(1.0, cert.scale)
    rows = _primal_cone_rows(cert)
    basis = _null_basis(rows, n, cut)
    thr = RANK_TOL * cert.scale

    if cert.subspace_regime:
        if basis.shape[1] == 0:
            return ConditionVerdict(
                HOLDS, EXACT_SUBSPACE, reason="critical cone is trivial"
            )
        vals, vecs = np.linalg.eigh(basis.T @ form @ basis)
        if vals[0] > thr:
            return ConditionVerdict(
                HOLDS, EXACT_SUBSPACE,
                reason=f"form is positive on the critical subspace "
                       f"(min eigenvalue {vals[0]:.3e})",
            )
        d = basis @ vecs[:, 0]
        wit = {"direction": d, "form_value": sosc_primal_value(cert, d)}
        return ConditionVerdict(
            FAILS, EXACT_SUBSPACE, witness=wit,
            reason=f"flat or negative critical direction "
                   f"(min eigenvalue {vals[0]:.3e})",
        )

    # conservative path: the subspace spanned by the rows above contains the
    # cone, so positivity there certifies the condition
    if basis.shape[1] == 0:
        return ConditionVerdict(HOLDS, SAMPLED, reason="critical cone is trivial")
    vals = np.linalg.eigvalsh(basis.T @ form @ basis)
    if vals[0] > thr:
        return ConditionVerdict(
            HOLDS, SAMPLED,
            reason="form is positive on a superset of the critical cone",
        )
    rng = np.random.default_rng(_SAMPLE_SEED)
    mtol = WITNESS_TOL * max(1.0, cert.scale)
    for _ in range(SAMPLE_COUNT):
        d = basis @ rng.standard_normal(basis.shape[1])
        nd = np.linalg.norm(d)
        if nd == 0 or not _member_primal_cone(cert, d, mtol):
            continue
        val = sosc_primal_value(cert, d)
        if val <= thr * nd * nd:
            wit = {"direction": d, "form_value": val}
            return ConditionVerdict(
                FAILS, SAMPLED, witness=wit,
                reason="sampled critical direction with non-positive curvature",
            )
    return ConditionVerdict(
        UNDETERMINED, SAMPLED,
        reason="superset test inconclusive and no violating sample found",
    )


def sosc_dual(cert: CertifiedKKT) -> ConditionVerdict:
    """Positivity of the dual curvature form on the dual critical cone.

    Requires the dual multiplier to be certified unique.  Directions are
    tuples ``(d_s, d_y, d_w, d_z)`` tied by the dual feasibility equation,
    with the slack direction confined to the tangent slice of the slack cone
    and the polyhedral direction to the dual activity cone.
    """
    _require_cert(cert)
    if cert.lambda_d.status != HOLDS:
        return ConditionVerdict(
            UNDETERMINED, cert.lambda_d.method,
            reason="multiplier uniqueness not established: " + cert.lambda_d.reason,
        )
    n, m = cert.dim, cert.qp.n_eq
    dual = cert.dual if cert.dual is not None else build_dual_model(cert.qp)
    r = dual.rank
    fr = cert.frame()
    include_weak = not cert.subspace_regime

    if cert.qp.cone == "psd":
        # span of the slack tangent slice: everything off the positive block
        bs = fr.rot[:, ~fr.mask([(0, 0), (0, 1)])]
    else:
        bs = np.zeros((n, 0))
    zc = [
        i for i, c in enumerate(cert.box_codes)
        if c == polyset.ZERO or (include_weak and c in (polyset.NONNEG, polyset.NONPOS))
    ]
    e_z = np.zeros((n, len(zc)))
    e_z[zc, np.arange(len(zc))] = 1.0

    ks = bs.shape[1]
    sys = np.hstack([
        bs,
        cert.qp.con_mat.T,
        -(dual.basis * dual.eigs) if r else np.zeros((n, 0)),
        e_z,
    ])
    cut = RANK_TOL * max(1.0, cert.scale)
    kern = _null_basis(sys, sys.shape[1], cut)
    thr = RANK_TOL * cert.scale
    method = EXACT_SUBSPACE if cert.subspace_regime else SAMPLED
    if kern.shape[1] == 0:
        return ConditionVerdict(method=method, status=HOLDS,
                                reason="critical cone is trivial")

    form = np.zeros((sys.shape[1], sys.shape[1]))
    if cert.qp.cone == "psd":
        curv = 2.0 * _curvature_matrix(
            cert.qp.space, cert.x_matrix(), cert.s_pinv_matrix()
        )
        form[:ks, :ks] = bs.T @ curv @ bs
    if r:
        sl = slice(ks + m, ks + m + r)
        form[sl, sl] = np.diag(dual.eigs)
    vals, vecs = np.linalg.eigh(kern.T @ form @ kern)

    def unpack(t):
        return {
            "d_s": bs @ t[:ks],
            "d_y": t[ks:ks + m],
            "d_w": dual.w_full(t[ks + m:ks + m + r]),
            "d_z": e_z @ t[ks + m + r:],
        }

    if cert.subspace_regime:
        if vals[0] > thr:
            return ConditionVerdict(
                HOLDS, EXACT_SUBSPACE,
                reason=f"form is positive on the critical subspace "
                       f"(min eigenvalue {vals[0]:.3e})",
            )
        wit = unpack(kern @ vecs[:, 0])
        wit["form_value"] = sosc_dual_value(cert, wit["d_s"], wit["d_w"])
        return ConditionVerdict(
            FAILS, EXACT_SUBSPACE, witness=wit,
            reason=f"flat or negative critical direction "
                   f"(min eigenvalue {vals[0]:.3e})",
        )

    if vals[0] > thr:
        return ConditionVerdict(
            HOLDS, SAMPLED,
            reason="form is positive on a superset of the critical cone",
        )
    rng = np.random.default_rng(_SAMPLE_SEED)
    mtol = WITNESS_TOL * max(1.0, cert.scale)
    for _ in range(SAMPLE_COUNT):
        t = kern @ rng.standard_normal(kern.shape[1])
        nt = np.linalg.norm(t)
        if nt == 0:
            continue
        parts = unpack(t)
        if cert.qp.cone == "psd" and not matcone.in_critical_cone_psd(
            smat(parts["d_s"]), cert.triple_sx, tol=mtol
        ):
            continue
        good = True
        for i in np.flatnonzero(cert.weak_active()):
            code = cert.box_codes[i]
            dzi = parts["d_z"][i]
            if code == polyset.NONNEG and dzi < -mtol:
                good = False
            if code == polyset.NONPOS and dzi > mtol:
                good = False
        if not good:
            continue
        val = sosc_dual_value(cert, parts["d_s"], parts["d_w"])
        if val <= thr * nt * nt:
            parts["form_value"] = val
            return ConditionVerdict(
                FAILS, SAMPLED, witness=parts,
                reason="sampled critical direction with non-positive curvature",
            )
    return ConditionVerdict(
        UNDETERMINED, SAMPLED,
        reason="superset test inconclusive and no violating sample found",
    )


# ---------------------------------------------------------------------------
# covering conditions
# ---------------------------------------------------------------------------


def _box_cols(cert: CertifiedKKT, dualize: bool):
    """Lineality columns and ray columns of the box-side cone.

    ``dualize=False`` classifies by the critical-cone codes of ``(u, z)``;
    ``dualize=True`` by their dual codes.
    """
    codes = cert.box_codes
    if dualize:
        codes = polyset.dual_cone_codes(codes)
    n = cert.dim
    lin_idx, ray_idx, ray_sign = [], [], []
    for i, c in enumerate(codes):
        if c == polyset.FREE:
            lin_idx.append(i)
        elif c == polyset.NONNEG:
            ray_idx.append(i)
            ray_sign.append(1.0)
        elif c == polyset.NONPOS:
            ray_idx.append(i)
            ray_sign.append(-1.0)
    lin = np.zeros((n, len(lin_idx)))
    lin[lin_idx, np.arange(len(lin_idx))] = 1.0
    rays = np.zeros((n, len(ray_idx)))
    rays[ray_idx, np.arange(len(ray_idx))] = np.asarray(ray_sign)
    return lin, rays


def srcq_dual(cert: CertifiedKKT) -> ConditionVerdict:
    """Covering condition on the dual side.

    Asks the tangent slice of the slack cone, the dual activity cone of the
    box, the range of the adjoint constraint map and the range of the
    quadratic term to sum to the whole matrix space.
    """
    _require_cert(cert)
    n = cert.dim
    dual = cert.dual if cert.dual is not None else build_dual_model(cert.qp)
    fr = cert.frame()
    if fr is not None:
        tl = fr.rot[:, ~fr.mask([(0, 0), (0, 1), (1, 1)])]
        ts = fr.rot[:, ~fr.mask([(0, 0), (0, 1)])]
    else:
        tl = ts = np.zeros((n, 0))
    box_lin, box_rays = _box_cols(cert, dualize=True)
    ranges = [cert.qp.con_mat.T]
    if dual.rank:
        ranges.append(dual.basis)
    lin = np.hstack([tl, box_lin] + ranges)
    span = np.hstack([ts, box_lin, box_rays] + ranges)
    return _covering_verdict_spans(cert, lin, span, n)


def _covering_verdict_spans(cert, lin, span, target_dim) -> ConditionVerdict:
    """Three-way covering verdict from lineality and span generator columns.

    The lineality part alone filling the target certifies the covering; the
    span of all generators failing to fill it refutes it, since each summand
    cone lives inside its span; anything in between stays undetermined.  In
    the subspace regime the cones equal their linealities, the two tests
    coincide, and the verdict is exact.
    """
    cut = RANK_TOL * max(1.0, cert.scale)
    method = EXACT_SUBSPACE if cert.subspace_regime else SAMPLED
    if _numeric_rank(lin, cut) == target_dim:
        return ConditionVerdict(
            HOLDS, method, reason="lineality spaces already cover the target"
        )
    if _numeric_rank(span, cut) < target_dim:
        h = _left_null_direction(span, target_dim)
        wit = {
            "uncovered_direction": h,
            "max_overlap": float(np.abs(span.T @ h).max(initial=0.0)),
        }
        return ConditionVerdict(
            FAILS, method, witness=wit,
            reason="the span of all generators misses a direction",
        )
    return ConditionVerdict(
        UNDETERMINED, SAMPLED,
        reason="rays matter and the covering cannot be decided by rank tests",
    )


def srcq_primal(cert: CertifiedKKT) -> ConditionVerdict:
    """Covering condition on the primal side.

    Stacks the constraint image over the identity on the tangent slice of
    the conic variable and adds the box critical cone in the second factor;
    the sum must fill the product of the multiplier space and the matrix
    space.
    """
    _require_cert(cert)
    n, m = cert.dim, cert.qp.n_eq
    fr = cert.frame()
    if fr is not None:
        tl = fr.rot[:, ~fr.mask([(2, 2), (2, 1), (1, 1)])]
        ts = fr.rot[:, ~fr.mask([(2, 2), (2, 1)])]
    else:
        tl = ts = np.eye(n)
    box_lin, box_rays = _box_cols(cert, dualize=False)

    def stack(t_cols, b_lin, b_rays):
        top = cert.qp.con_mat @ t_cols
        lift = np.vstack([top, t_cols])
        blin = np.vstack([np.zeros((m, b_lin.shape[1])), b_lin])
        brays = np.vstack([np.zeros((m, b_rays.shape[1])), b_rays])
        return np.hstack([lift, blin]), np.hstack([lift, blin, brays])

    lin, _ = stack(tl, box_lin, box_rays)
    _, span = stack(ts, box_lin, box_rays)
    return _covering_verdict_spans(cert, lin, span, m + n)


# ---------------------------------------------------------------------------
# directional-derivative system
# ---------------------------------------------------------------------------


def dd_residual(cert: CertifiedKKT, d_x, d_y, d_z) -> np.ndarray:
    """Directional derivative of the primal first-order residual map.

    Evaluated exactly, including the piecewise behaviour at weakly active
    coordinates and a nontrivial zero eigenvalue block.  A direction in its
    kernel certifies that the first-order system admits a flat perturbation.
    """
    d_x = np.asarray(d_x, dtype=float)
    d_y = np.asarray(d_y, dtype=float)
    d_z = np.asarray(d_z, dtype=float)
    qp = cert.qp
    g = qp.quad_apply(d_x) - qp.con_mat.T @ d_y - d_z
    if qp.cone == "psd":
        arg = smat(-d_x + g)
        r1 = d_x + svec(matcone.dir_deriv_proj_nsd(cert.triple_sx, arg))
    else:
        r1 = g
    base = cert.u - cert.z
    r2 = d_x - polyset.dir_deriv_project_box(cert.box, base, d_x - d_z)
    r3 = qp.con_mat @ d_x
    return np.concatenate([r1, r2, r3])


def _dd_branch_residual(cert, sel, d_x, d_y, d_z) -> np.ndarray:
    """Branch linearization of :func:`dd_residual`.

    ``sel`` picks, per coordinate, whether the box projection derivative
    passes the direction through (1) or annihilates it (0); valid only when
    the zero eigenvalue block is empty so the matrix part is exactly linear.
    """
    qp = cert.qp
    g = qp.quad_apply(d_x) - qp.con_mat.T @ d_y - d_z
    if qp.cone == "psd":
        arg = smat(-d_x + g)
        r1 = d_x + svec(matcone.dir_deriv_proj_nsd(cert.triple_sx, arg))
    else:
        r1 = g
    r2 = d_x - sel * (d_x - d_z)
    r3 = qp.con_mat @ d_x
    return np.concatenate([r1, r2, r3])


def _dd_matrix(cert: CertifiedKKT, residual_fn) -> np.ndarray:
    n, m = cert.dim, cert.qp.n_eq
    total = 2 * n + m
    if total == 0:
        return np.zeros((0, 0))
    cols = []
    for j in range(total):
        e = np.zeros(total)
        e[j] = 1.0
        cols.append(residual_fn(e[:n], e[n:n + m], e[n + m:]))
    return np.column_stack(cols)


def _dd_split(cert, d):
    n, m = cert.dim, cert.qp.n_eq
    return d[:n], d[n:n + m], d[n + m:]


def dd_system_test(cert: CertifiedKKT) -> ConditionVerdict:
    """Kernel triviality of the directional-derivative system.

    In the subspace regime the system is a single linear map assembled
    column by column; the verdict compares its smallest singular value with
    the rank threshold.  Outside the regime, known multiplier-line witnesses
    are replayed first, then (if the zero eigenvalue block is empty) the
    finitely many box branch patterns are enumerated; a ``fails`` verdict is
    only issued with a direction whose exact residual replays to zero.
    """
    _require_cert(cert)
    n, m = cert.dim, cert.qp.n_eq
    total = 2 * n + m
    scale = cert.scale
    thr = RANK_TOL * scale

    if cert.subspace_regime:
        mat = _dd_matrix(cert, lambda a, b, c: dd_residual(cert, a, b, c))
        sv = np.linalg.svd(mat, compute_uv=False)
        # a zero-dimensional system has nothing but the trivial kernel
        smin = sv[-1] if sv.size else math.inf
        if smin > thr:
            return ConditionVerdict(
                HOLDS, EXACT_SUBSPACE,
                reason=f"system kernel is trivial (min singular value {smin:.3e})",
            )
        _, _, vt = np.linalg.svd(mat)
        d = vt[-1]
        res = float(np.linalg.norm(dd_residual(cert, *_dd_split(cert, d))))
        if res <= WITNESS_TOL * scale:
            d_x, d_y, d_z = _dd_split(cert, d)
            wit = {"d_x": d_x, "d_y": d_y, "d_z": d_z, "residual": res}
            return ConditionVerdict(
                FAILS, EXACT_SUBSPACE, witness=wit,
                reason="the system admits a flat direction",
            )
        return ConditionVerdict(
            UNDETERMINED, EXACT_SUBSPACE,
            reason=f"smallest singular value {smin:.3e} is borderline",
        )

    # outside the regime: replay multiplier-line witnesses first
    for lam, build in (
        (cert.lambda_p, lambda w: (np.zeros(n), w["d_y"], w["d_z"])),
        (cert.lambda_d, lambda w: (w["d_x"], np.zeros(m), np.zeros(n))),
    ):
        if lam is None or lam.status != FAILS:
            continue
        d_x, d_y, d_z = build(lam.witness)
        nd = math.sqrt(
            float(d_x @ d_x) + float(d_y @ d_y) + float(d_z @ d_z)
        )
        if nd == 0:
            continue
        res = float(np.linalg.norm(dd_residual(cert, d_x, d_y, d_z)))
        if res <= WITNESS_TOL * scale * nd:
            wit = {"d_x": d_x, "d_y": d_y, "d_z": d_z, "residual": res}
            return ConditionVerdict(
                FAILS, SAMPLED, witness=wit,
                reason="a multiplier line is flat for the system",
            )

    beta_empty = cert.qp.cone != "psd" or cert.triple_xs.beta.size == 0
    if not beta_empty:
        return ConditionVerdict(
            UNDETERMINED, SAMPLED,
            reason="nontrivial zero eigenvalue block precludes exact "
                   "branch enumeration",
        )

    weak = np.flatnonzero(cert.weak_active())
    base_sel = np.array(
        [1.0 if c == polyset.FREE else 0.0 for c in cert.box_codes]
    )
    exhaustive = weak.size <= _BRANCH_CAP
    if exhaustive:
        patterns = range(1 << weak.size)
    else:
        rng = np.random.default_rng(_SAMPLE_SEED)
        patterns = rng.integers(0, 1 << 30, size=512)
    all_trivial = True
    for bits in patterns:
        sel = base_sel.copy()
        for t, i in enumerate(weak):
            sel[i] = float((int(bits) >> t) & 1)
        mat = _dd_matrix(
            cert, lambda a, b, c, s=sel: _dd_branch_residual(cert, s, a, b, c)
        )
        sv = np.linalg.svd(mat, compute_uv=False)
        if sv[-1] > thr:
            continue
        all_trivial = False
        _, _, vt = np.linalg.svd(mat)
        d = vt[-1]
        res = float(np.linalg.norm(dd_residual(cert, *_dd_split(cert, d))))
        if res <= WITNESS_TOL * scale:
            d_x, d_y, d_z = _dd_split(cert, d)
            wit = {"d_x": d_x, "d_y": d_y, "d_z": d_z, "residual": res}
            return ConditionVerdict(
                FAILS, SAMPLED, witness=wit,
                reason="a branch kernel direction replays through the exact system",
            )
    if all_trivial and exhaustive:
        return ConditionVerdict(
            HOLDS, SAMPLED,
            reason="every box branch linearization has a trivial kernel",
        )
    return ConditionVerdict(
        UNDETERMINED, SAMPLED,
        reason="some branch kernel did not replay and enumeration was "
               "not exhaustive" if not exhaustive else
               "a branch kernel direction failed to replay exactly",
    )


# ---------------------------------------------------------------------------
# cross-checked report
# ---------------------------------------------------------------------------


def _conjunction(name_a, a: ConditionVerdict, name_b, b: ConditionVerdict) -> dict:
    if FAILS in (a.status, b.status):
        status = FAILS
    elif a.status == HOLDS and b.status == HOLDS:
        status = HOLDS
    else:
        status = UNDETERMINED
    return {
        "status": status,
        "parts": {name_a: a.status, name_b: b.status},
        "methods": {name_a: a.method, name_b: b.method},
    }


def thm55_report(cert: CertifiedKKT, force_inconsistent: bool = False) -> dict:
    """Evaluate all condition checks and cross-check their agreement.

    The five condition checks are mutually equivalent for this problem
    class, so all determined composite verdicts must agree.  In the subspace
    regime every verdict is exact and a disagreement is a genuine internal
    contradiction: it raises ``AssertionError``.  Outside the regime the
    report lists disagreements without asserting.  ``force_inconsistent`` is
    a test hook that deliberately corrupts one verdict.
    """
    _require_cert(cert)
    atoms = {
        "sosc_primal": sosc_primal(cert),
        "sosc_dual": sosc_dual(cert),
        "srcq_primal": srcq_primal(cert),
        "srcq_dual": srcq_dual(cert),
        "dd_system": dd_system_test(cert),
    }
    items = {
        "both_second_order": _conjunction(
            "sosc_primal", atoms["sosc_primal"], "sosc_dual", atoms["sosc_dual"]
        ),
        "both_coverings": _conjunction(
            "srcq_primal", atoms["srcq_primal"], "srcq_dual", atoms["srcq_dual"]
        ),
        "primal_pair": _conjunction(
            "sosc_primal", atoms["sosc_primal"], "srcq_primal", atoms["srcq_primal"]
        ),
        "dual_pair": _conjunction(
            "sosc_dual", atoms["sosc_dual"], "srcq_dual", atoms["srcq_dual"]
        ),
        "stability": {
            "status": atoms["dd_system"].status,
            "parts": {"dd_system": atoms["dd_system"].status},
            "methods": {"dd_system": atoms["dd_system"].method},
        },
    }
    if force_inconsistent:
        determined = [v["status"] for v in items.values() if v["status"] != UNDETERMINED]
        flip = HOLDS if (determined and determined[0] == FAILS) else FAILS
        items["both_coverings"] = dict(items["both_coverings"], status=flip)
        items["both_coverings"]["forced"] = True

    statuses = {k: v["status"] for k, v in items.items() if v["status"] != UNDETERMINED}
    agree = len(set(statuses.values())) <= 1
    disagreements = []
    if not agree:
        keys = sorted(statuses)
        for i, ka in enumerate(keys):
            for kb in keys[i + 1:]:
                if statuses[ka] != statuses[kb]:
                    disagreements.append([ka, statuses[ka], kb, statuses[kb]])
    report = {
        "certificate": cert.summary(),
        "atoms": atoms,
        "items": items,
        "determined": statuses,
        "agree": agree,
        "disagreements": disagreements,
        "subspace_regime": cert.subspace_regime,
    }
    if cert.subspace_regime and not agree:
        raise AssertionError(
            "determined verdicts disagree in the subspace regime: "
            + "; ".join(
                f"{a}={sa} vs {b}={sb}" for a, sa, b, sb in disagreements
            )
        )
    return report


def report_to_json(report: dict) -> str:
    """Serialize a report (verdict objects included) to an indented string."""
    def conv(obj):
        if isinstance(obj, ConditionVerdict):
            return obj.to_dict()
        if isinstance(obj, dict):
            return {k: conv(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [conv(v) for v in obj]
        return _jsonable(obj)

    return json.dumps(conv(report), indent=2)
