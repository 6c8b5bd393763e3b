"""Tests for certification and second-order condition verdicts.

Oracles: per-coordinate closed forms for separable instances, reduced-Hessian
eigenvalues through scipy null spaces, matrix ranks for the covering
conditions, and hand-built multiplier lines for the degenerate programs.
Every failing verdict is replayed through its defining equations.
"""

import json
import math

import numpy as np
import pytest
from scipy.linalg import null_space

from spadmm import (
    BoxPolyFun,
    BoxSet,
    ConicQP,
    SpaceSpec,
    certify_kkt,
    dd_system_test,
    sosc_dual,
    sosc_primal,
    srcq_dual,
    srcq_primal,
    thm55_report,
)
from spadmm.errors import InputError
from spadmm.matcone import in_critical_cone_psd
from spadmm.model import WeightedL1, smat, svec
from spadmm.sgs import SGSConfig
from spadmm.vananalysis import (
    EXACT_SUBSPACE,
    FAILS,
    HOLDS,
    SAMPLED,
    UNDETERMINED,
    dd_residual,
    multiplier_eq_residual,
    report_to_json,
    sosc_dual_value,
    sosc_primal_value,
)


def free_box(d):
    return BoxPolyFun(BoxSet(np.full(d, -np.inf), np.full(d, np.inf)))


DIAG_Q = np.array([2.0, 1.0, 4.0])
DIAG_C = np.array([-2.0, -3.0, -8.0])


def diag_toy_qp():
    """Separable instance: optimal matrix is diag(-c_i/q_i), slack zero."""
    p = DIAG_Q.size
    d = p * (p + 1) // 2
    ii, jj = np.triu_indices(p)
    qv, cv = np.ones(d), np.zeros(d)
    for k, (i, j) in enumerate(zip(ii, jj)):
        if i == j:
            qv[k], cv[k] = DIAG_Q[i], DIAG_C[i]
    return ConicQP(space=SpaceSpec.symmetric(p), quad=np.diag(qv), cost=cv,
                   con_mat=np.zeros((0, d)), con_rhs=np.zeros(0),
                   cone="psd", poly=free_box(d))


def trace_qp(quad, cost):
    """p=2 semidefinite instance with the single constraint trace(x) = 2."""
    row = svec(np.eye(2))
    return ConicQP(space=SpaceSpec.symmetric(2), quad=quad, cost=cost,
                   con_mat=row[None, :], con_rhs=np.array([2.0]),
                   cone="psd", poly=free_box(3))


TRACE_NULL = null_space(svec(np.eye(2))[None, :])  # basis of ker(trace row)
X_STAR = svec(np.eye(2))


@pytest.fixture(scope="module")
def cert_diag():
    return certify_kkt(diag_toy_qp())


@pytest.fixture(scope="module")
def cert_flat():
    """Zero objective on the trace slice: every feasible point is optimal."""
    return certify_kkt(trace_qp(None, np.zeros(3)))


@pytest.fixture(scope="module")
def cert_planted():
    """Quadratic positive definite on the constraint kernel, optimum at I."""
    q = TRACE_NULL @ TRACE_NULL.T
    return certify_kkt(trace_qp(q, -q @ X_STAR))


@pytest.fixture(scope="module")
def cert_rank1():
    """Quadratic positive on one kernel direction only; a flat one remains."""
    n1 = TRACE_NULL[:, :1]
    q = n1 @ n1.T
    return certify_kkt(trace_qp(q, -q @ X_STAR))


@pytest.fixture(scope="module")
def cert_dup():
    """Duplicated equality row: the multiplier moves along a line."""
    qp = ConicQP(space=SpaceSpec.vector(2), quad=None, cost=np.array([1.0, 1.0]),
                 con_mat=np.array([[1.0, 0.0], [1.0, 0.0]]),
                 con_rhs=np.array([1.0, 1.0]), cone="none",
                 poly=BoxPolyFun(BoxSet(np.zeros(2), np.full(2, np.inf))))
    return certify_kkt(qp)


@pytest.fixture(scope="module")
def cert_ray():
    """No data at all; one weakly active coordinate, one interior."""
    qp = ConicQP(space=SpaceSpec.vector(2), quad=None, cost=np.zeros(2),
                 con_mat=np.zeros((0, 2)), con_rhs=np.zeros(0), cone="none",
                 poly=BoxPolyFun(BoxSet(np.array([0.0, -1.0]),
                                        np.array([np.inf, 1.0]))))
    return certify_kkt(qp)


@pytest.fixture(scope="module")
def cert_cover():
    """Full-rank quadratic whose range alone covers the target space."""
    qp = ConicQP(space=SpaceSpec.vector(3), quad=np.eye(3),
                 cost=np.array([1.0, -2.0, 0.5]), con_mat=np.zeros((0, 3)),
                 con_rhs=np.zeros(0), cone="none", poly=free_box(3))
    return certify_kkt(qp)


@pytest.fixture(scope="module")
def cert_dual_strict():
    """Optimum at the cone vertex with a strictly positive slack."""
    qp = ConicQP(space=SpaceSpec.symmetric(2), quad=np.eye(3),
                 cost=svec(2.0 * np.eye(2)), con_mat=np.zeros((0, 3)),
                 con_rhs=np.zeros(0), cone="psd", poly=free_box(3))
    return certify_kkt(qp)


@pytest.fixture(scope="module")
def cert_zero_dim():
    qp = ConicQP(space=SpaceSpec.vector(0), quad=None, cost=np.zeros(0),
                 con_mat=np.zeros((0, 0)), con_rhs=np.zeros(0), cone="none",
                 poly=free_box(0))
    return certify_kkt(qp)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def test_certify_diagonal_toy_matches_closed_form(cert_diag):
    cert = cert_diag
    assert cert.ok and cert.solve_status == "converged"
    xm = cert.x_matrix()
    assert np.allclose(np.diag(xm), -DIAG_C / DIAG_Q, atol=1e-9)
    assert np.abs(xm - np.diag(np.diag(xm))).max() <= 1e-9
    assert np.linalg.eigvalsh(xm).min() >= 0.99
    assert np.linalg.norm(cert.s) <= 1e-9

    assert cert.fp_norm <= cert.tol * cert.scale
    assert cert.fd_norm <= cert.tol * cert.scale
    assert cert.comp <= cert.tol * cert.scale
    assert cert.rel_residual <= 1e-7

    assert cert.triple_xs.beta.size == 0
    assert cert.subspace_regime
    assert set(cert.box_codes) == {"free"}
    assert cert.lambda_p.status == HOLDS and cert.lambda_d.status == HOLDS

    top = cert.summary()
    assert top["ok"] and top["subspace_regime"]
    assert top["pair_split"] == {"positive": 3, "zero": 0, "negative": 0}


def test_certify_flags_degenerate_matrix_pair():
    # one eigenvalue of the optimal matrix sits at zero together with the slack
    row = svec(np.diag([1.0, 0.0]))
    qp = ConicQP(space=SpaceSpec.symmetric(2), quad=None, cost=np.zeros(3),
                 con_mat=row[None, :], con_rhs=np.array([1.0]),
                 cone="psd", poly=free_box(3))
    cert = certify_kkt(qp)
    assert cert.ok
    assert cert.triple_xs.beta.size >= 1
    assert not cert.subspace_regime
    assert cert.lambda_p.status == UNDETERMINED
    assert cert.lambda_p.method == SAMPLED
    assert "one-sided" in cert.lambda_p.reason


def test_certify_reports_infeasibility():
    row = svec(np.diag([1.0, 0.0]))
    qp = ConicQP(space=SpaceSpec.symmetric(2), quad=None, cost=np.zeros(3),
                 con_mat=np.vstack([row, row]), con_rhs=np.array([1.0, 2.0]),
                 cone="psd", poly=free_box(3))
    cert = certify_kkt(qp, config=SGSConfig(sigma=1.0, tau=1.0, tol=1e-11,
                                            max_iter=2000))
    assert not cert.ok
    assert "residual" in cert.reason
    assert cert.solve_status == "max_iter"
    with pytest.raises(InputError, match="certified point"):
        sosc_primal(cert)


def test_certify_rejects_non_box_polyhedral_terms():
    qp = ConicQP(space=SpaceSpec.vector(2), quad=np.eye(2), cost=np.ones(2),
                 con_mat=np.zeros((0, 2)), con_rhs=np.zeros(0), cone="none",
                 poly=WeightedL1(np.ones(2)))
    with pytest.raises(InputError, match="box"):
        certify_kkt(qp)


# ---------------------------------------------------------------------------
# primal curvature condition
# ---------------------------------------------------------------------------


def test_sosc_primal_strictly_convex_holds(cert_diag):
    v = sosc_primal(cert_diag)
    assert v.status == HOLDS and v.method == EXACT_SUBSPACE


def test_sosc_primal_flat_objective_fails_with_witness(cert_flat):
    cert = cert_flat
    assert cert.ok and cert.subspace_regime
    assert cert.lambda_p.status == HOLDS
    v = sosc_primal(cert)
    assert v.status == FAILS and v.method == EXACT_SUBSPACE
    d = np.asarray(v.witness["direction"])
    nd = np.linalg.norm(d)
    assert nd > 0.1
    # replay: the direction is critical and the curvature form vanishes on it
    assert np.linalg.norm(cert.qp.con_mat @ d) <= 1e-8 * nd
    assert in_critical_cone_psd(smat(d), cert.triple_xs, tol=1e-8)
    assert abs(sosc_primal_value(cert, d)) <= 1e-8 * (1.0 + nd * nd)
    assert abs(v.witness["form_value"]) <= 1e-8


def test_sosc_primal_matches_reduced_hessian_oracle(cert_planted, cert_rank1):
    # oracle: eigenvalues of the quadratic restricted to the constraint kernel
    for cert, expect in ((cert_planted, HOLDS), (cert_rank1, FAILS)):
        assert cert.ok and cert.subspace_regime
        red = TRACE_NULL.T @ cert.qp.quad @ TRACE_NULL
        oracle = float(np.linalg.eigvalsh(red).min())
        v = sosc_primal(cert)
        assert v.method == EXACT_SUBSPACE
        assert v.status == (HOLDS if oracle > 1e-8 else FAILS)
        assert v.status == expect
    assert np.abs(cert_planted.x_matrix() - np.eye(2)).max() <= 1e-7


def test_sosc_primal_verdict_is_scale_covariant():
    for lam in (7.3, 0.002):
        n1 = TRACE_NULL[:, :1]
        q1 = TRACE_NULL @ TRACE_NULL.T
        q2 = n1 @ n1.T
        up = certify_kkt(trace_qp(lam * q1, lam * (-q1 @ X_STAR)))
        down = certify_kkt(trace_qp(lam * q2, lam * (-q2 @ X_STAR)))
        assert sosc_primal(up).status == HOLDS
        assert sosc_primal(down).status == FAILS


def test_sosc_primal_needs_unique_multiplier(cert_dup):
    assert cert_dup.lambda_p.status == FAILS
    v = sosc_primal(cert_dup)
    assert v.status == UNDETERMINED
    assert "uniqueness" in v.reason


# ---------------------------------------------------------------------------
# dual curvature condition
# ---------------------------------------------------------------------------


def test_sosc_dual_strict_slack_holds(cert_dual_strict):
    cert = cert_dual_strict
    assert cert.ok and cert.subspace_regime
    assert np.linalg.norm(cert.x) <= 1e-9
    assert np.linalg.eigvalsh(cert.s_matrix()).min() >= 2.0 - 1e-8
    # oracle: with the conic variable at zero the curvature term dies and the
    # quadratic is positive definite, so the reduced form is positive
    assert np.linalg.eigvalsh(cert.qp.quad).min() > 0.99
    v = sosc_dual(cert)
    assert v.status == HOLDS and v.method == EXACT_SUBSPACE


def test_sosc_dual_flat_trace_instance_fails(cert_flat):
    # the dual multiplier is non-unique (kernel of the single-row map)
    assert cert_flat.lambda_d.status == FAILS
    wit = cert_flat.lambda_d.witness
    d_x = np.asarray(wit["d_x"])
    assert wit["constraint_residual"] <= 1e-8
    assert np.linalg.norm(cert_flat.qp.con_mat @ d_x) <= 1e-8
    v = sosc_dual(cert_flat)
    assert v.status == UNDETERMINED and "uniqueness" in v.reason


def test_sosc_dual_fails_on_multiplier_line(cert_dup):
    assert cert_dup.lambda_d.status == HOLDS
    v = sosc_dual(cert_dup)
    assert v.status == FAILS and v.method == EXACT_SUBSPACE
    w = v.witness
    d_s, d_y = np.asarray(w["d_s"]), np.asarray(w["d_y"])
    d_w, d_z = np.asarray(w["d_w"]), np.asarray(w["d_z"])
    # replay the dual feasibility direction equation (quadratic term absent)
    assert np.linalg.norm(d_s + cert_dup.qp.con_mat.T @ d_y + d_z) <= 1e-8
    assert abs(w["form_value"]) <= 1e-10
    assert np.linalg.norm(d_y) > 0.1


# ---------------------------------------------------------------------------
# covering conditions
# ---------------------------------------------------------------------------


def test_srcq_dual_holds_by_rank_oracle(cert_cover):
    cert = cert_cover
    # oracle: the quadratic range alone spans the whole space
    gens = np.hstack([cert.qp.con_mat.T, cert.qp.quad])
    assert np.linalg.matrix_rank(gens) == cert.dim
    v = srcq_dual(cert)
    assert v.status == HOLDS and v.method == EXACT_SUBSPACE


def test_srcq_dual_fails_when_generators_are_rank_deficient(cert_flat):
    cert = cert_flat
    # oracle: the only generator is the single adjoint column, rank 1 of 3
    assert np.linalg.matrix_rank(cert.qp.con_mat.T) == 1
    v = srcq_dual(cert)
    assert v.status == FAILS and v.method == EXACT_SUBSPACE
    h = np.asarray(v.witness["uncovered_direction"])
    assert abs(np.linalg.norm(h) - 1.0) <= 1e-10
    assert v.witness["max_overlap"] <= 1e-8
    assert np.abs(cert.qp.con_mat @ h).max() <= 1e-8


def test_srcq_dual_ray_only_dimension_count(cert_ray):
    cert = cert_ray
    assert cert.box_codes == ["nonneg", "free"]
    assert not cert.subspace_regime
    v = srcq_dual(cert)
    # a single ray cannot cover the plane; the span test certifies failure
    # even outside the subspace regime
    assert v.status == FAILS and v.method == SAMPLED
    h = np.asarray(v.witness["uncovered_direction"])
    assert abs(abs(h[1]) - 1.0) <= 1e-10 and abs(h[0]) <= 1e-10


def test_srcq_primal_cover_and_deficiency(cert_diag, cert_dup):
    assert srcq_primal(cert_diag).status == HOLDS
    v = srcq_primal(cert_dup)
    assert v.status == FAILS and v.method == EXACT_SUBSPACE
    # oracle: the duplicated rows leave the image of the lifted constraint
    # map short of the four-dimensional target by one
    a = cert_dup.qp.con_mat
    assert np.linalg.matrix_rank(np.vstack([a, np.eye(2)])) == 2
    h = np.asarray(v.witness["uncovered_direction"])
    assert h.size == cert_dup.qp.n_eq + cert_dup.dim
    assert v.witness["max_overlap"] <= 1e-8


def test_srcq_trivial_full_space_instances_hold(cert_cover, cert_zero_dim):
    assert srcq_dual(cert_cover).status == HOLDS
    assert srcq_primal(cert_cover).status == HOLDS
    assert srcq_dual(cert_zero_dim).status == HOLDS
    assert srcq_primal(cert_zero_dim).status == HOLDS


# ---------------------------------------------------------------------------
# directional-derivative system
# ---------------------------------------------------------------------------


def test_dd_nondegenerate_holds_with_svd_oracle(cert_diag):
    cert = cert_diag
    v = dd_system_test(cert)
    assert v.status == HOLDS and v.method == EXACT_SUBSPACE

    # oracle: with the pair matrix positive definite and the box inactive the
    # system is linear: rows (Q d_x - d_z ; d_z), assembled independently
    d = cert.dim
    quad = cert.qp.quad
    oracle = np.block([[quad, -np.eye(d)], [np.zeros((d, d)), np.eye(d)]])
    assert np.linalg.svd(oracle, compute_uv=False)[-1] > 1e-8 * cert.scale
    rng = np.random.default_rng(7)
    for _ in range(20):
        d_x, d_z = rng.standard_normal(d), rng.standard_normal(d)
        got = dd_residual(cert, d_x, np.zeros(0), d_z)
        want = np.concatenate([quad @ d_x - d_z, d_z])
        assert np.linalg.norm(got - want) <= 1e-10


def test_dd_multiplier_line_fails_with_replayed_witness(cert_dup):
    cert = cert_dup
    lam = cert.lambda_p
    assert lam.status == FAILS
    d_y = np.asarray(lam.witness["d_y"])
    line = np.array([1.0, -1.0]) / math.sqrt(2.0)
    assert abs(abs(float(d_y @ line)) - 1.0) <= 1e-9
    assert lam.witness["equation_residual"] <= 1e-12
    assert multiplier_eq_residual(
        cert, np.asarray(lam.witness["d_s"]), d_y, np.asarray(lam.witness["d_z"])
    ) <= 1e-12

    v = dd_system_test(cert)
    assert v.status == FAILS
    w = v.witness
    d = np.concatenate([w["d_x"], w["d_y"], w["d_z"]])
    assert np.linalg.norm(w["d_x"]) <= 1e-8
    assert np.linalg.norm(w["d_y"]) >= 0.1
    res = np.linalg.norm(dd_residual(cert, w["d_x"], w["d_y"], w["d_z"]))
    assert res <= 1e-9 * cert.scale * np.linalg.norm(d)


def test_dd_zero_dimensional_system_holds_vacuously(cert_zero_dim):
    v = dd_system_test(cert_zero_dim)
    assert v.status == HOLDS
    assert "trivial" in v.reason


# ---------------------------------------------------------------------------
# cross-checked report
# ---------------------------------------------------------------------------


def test_report_nondegenerate_all_hold(cert_diag, cert_dual_strict):
    for cert in (cert_diag, cert_dual_strict):
        rep = thm55_report(cert)
        assert rep["agree"] and rep["subspace_regime"]
        assert set(rep["determined"].values()) == {HOLDS}
        assert set(rep["items"]) == {
            "both_second_order", "both_coverings", "primal_pair",
            "dual_pair", "stability",
        }
        assert all(v.method == EXACT_SUBSPACE for v in rep["atoms"].values())


def test_report_degenerate_all_fail(cert_flat, cert_dup):
    for cert in (cert_flat, cert_dup):
        rep = thm55_report(cert)
        assert rep["agree"]
        assert set(rep["determined"].values()) == {FAILS}
        assert rep["disagreements"] == []


def test_report_mixed_regime_lists_undetermined(cert_ray):
    rep = thm55_report(cert_ray)  # must not raise despite partial knowledge
    assert not rep["subspace_regime"]
    und = [k for k, v in rep["items"].items() if v["status"] == UNDETERMINED]
    assert und
    assert rep["agree"]


def test_report_zero_dimensional_consistency(cert_zero_dim):
    rep = thm55_report(cert_zero_dim)
    assert rep["agree"]
    assert rep["atoms"]["srcq_primal"].status == rep["atoms"]["srcq_dual"].status


def test_report_forced_inconsistency(cert_diag, cert_ray):
    with pytest.raises(AssertionError, match="disagree"):
        thm55_report(cert_diag, force_inconsistent=True)
    rep = thm55_report(cert_ray, force_inconsistent=True)
    assert not rep["agree"]
    assert rep["disagreements"]
    assert rep["items"]["both_coverings"].get("forced")


def test_report_serializes_to_json(cert_flat):
    rep = thm55_report(cert_flat)
    back = json.loads(report_to_json(rep))
    assert back["agree"] is True
    assert back["atoms"]["sosc_primal"]["status"] == FAILS
    wit = back["atoms"]["sosc_primal"]["witness"]
    assert isinstance(wit["direction"], list)
    assert back["certificate"]["ok"] is True


# ---------------------------------------------------------------------------
# global invariants
# ---------------------------------------------------------------------------


def test_every_failing_verdict_replays_its_witness(
    cert_flat, cert_dup, cert_ray, cert_rank1
):
    """Collected fails verdicts must re-violate their defining conditions."""
    seen = 0
    for cert in (cert_flat, cert_dup, cert_ray, cert_rank1):
        checks = {
            "sosc_primal": sosc_primal(cert),
            "sosc_dual": sosc_dual(cert),
            "srcq_primal": srcq_primal(cert),
            "srcq_dual": srcq_dual(cert),
            "dd": dd_system_test(cert),
        }
        for name, v in checks.items():
            if v.status != FAILS:
                continue
            seen += 1
            w = v.witness
            assert w is not None
            if name == "sosc_primal":
                d = np.asarray(w["direction"])
                val = sosc_primal_value(cert, d)
                assert val <= 1e-8 * cert.scale * float(d @ d)
            elif name == "sosc_dual":
                val = sosc_dual_value(cert, np.asarray(w["d_s"]),
                                      np.asarray(w["d_w"]))
                nrm = sum(float(np.asarray(w[k]) @ np.asarray(w[k]))
                          for k in ("d_s", "d_y", "d_w", "d_z"))
                assert val <= 1e-8 * cert.scale * nrm
                eq = (np.asarray(w["d_s"])
                      + cert.qp.con_mat.T @ np.asarray(w["d_y"])
                      - cert.qp.quad_apply(np.asarray(w["d_w"]))
                      + np.asarray(w["d_z"]))
                assert np.linalg.norm(eq) <= 1e-8 * cert.scale
            elif name in ("srcq_primal", "srcq_dual"):
                assert w["max_overlap"] <= 1e-8 * cert.scale
                h = np.asarray(w["uncovered_direction"])
                assert abs(np.linalg.norm(h) - 1.0) <= 1e-9
            else:
                res = np.linalg.norm(
                    dd_residual(cert, np.asarray(w["d_x"]),
                                np.asarray(w["d_y"]), np.asarray(w["d_z"]))
                )
                nd = math.sqrt(sum(float(np.asarray(w[k]) @ np.asarray(w[k]))
                                   for k in ("d_x", "d_y", "d_z")))
                assert res <= 1e-8 * cert.scale * nd
    assert seen >= 5


def test_exact_regime_reports_are_internally_consistent(
    cert_diag, cert_flat, cert_planted, cert_rank1, cert_dup, cert_dual_strict
):
    for cert in (cert_diag, cert_flat, cert_planted, cert_rank1, cert_dup,
                 cert_dual_strict):
        assert cert.subspace_regime
        rep = thm55_report(cert)  # raises AssertionError on any contradiction
        assert rep["agree"]
