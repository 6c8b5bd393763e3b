"""Release acceptance suite: one test per shipped criterion.

Each test states its tolerances inline; the conftest hook prints a PASS/FAIL
line per criterion at the end of the run.  The corpus fixtures are shared so
the expensive reference solves happen once.
"""

import math
import time

import numpy as np
import pytest

import test_matcone as mc

from spadmm import (
    BoxPolyFun,
    BoxSet,
    ConicQP,
    SGSConfig,
    SPADMMConfig,
    SpaceSpec,
    build_dual_model,
    dual_two_block,
    duality_gap,
    matcone,
    polyset,
    run_primal_spadmm,
    run_sgs_spadmm,
    run_spadmm,
    svec,
)
from spadmm.cli import generate_qp, generate_qsdp, main
from spadmm.diagnostics import (
    DiagnosticsLedger,
    OperatorBundle,
    assemble_forms,
    check_pd_equiv,
    stau_ttau,
)
from spadmm.model import kkt_residual_dual, primal_two_block
from spadmm.sgs import (
    SGSState,
    SGSWork,
    certificate_scale,
    sgs_optimality_certificates,
    sgs_step,
)
from spadmm.solver import GOLDEN
from spadmm.vananalysis import FAILS, HOLDS, UNDETERMINED, certify_kkt, thm55_report


# Twenty vector instances (n <= 50, m <= 20) and five matrix instances
# (p <= 10, m <= 5): the shared random corpus.
QP_SIZES = [
    (101, 8, 3), (102, 10, 4), (103, 12, 5), (104, 14, 6), (105, 16, 6),
    (106, 18, 7), (107, 20, 8), (108, 22, 9), (109, 24, 10), (110, 26, 11),
    (111, 28, 12), (112, 30, 12), (113, 32, 13), (114, 34, 14), (115, 36, 15),
    (116, 38, 16), (117, 40, 17), (118, 44, 18), (119, 48, 20), (120, 50, 20),
]
QSDP_SIZES = [(201, 3, 2), (202, 4, 3), (203, 6, 4), (204, 8, 5), (205, 10, 5)]
TAUS = (0.8, 1.0, 1.618)


def free_box(d):
    return BoxPolyFun(BoxSet(np.full(d, -np.inf), np.full(d, np.inf)))


@pytest.fixture(scope="module")
def corpus():
    """Instances plus deep reference solves (budget 1e5 iterations each)."""
    t0 = time.monotonic()
    instances = []
    for seed, n, m in QP_SIZES:
        qp, _ = generate_qp(seed=seed, n=n, m=m)
        instances.append(("qp", f"qp-{n}x{m}", qp))
    for seed, p, m in QSDP_SIZES:
        qp, _ = generate_qsdp(seed=seed, p=p, m=m)
        instances.append(("qsdp", f"qsdp-{p}x{m}", qp))
    rows = []
    for kind, name, qp in instances:
        prob = primal_two_block(qp)
        ref = run_spadmm(prob, SPADMMConfig(tol=1e-11, max_iter=100000))
        assert ref.status == "converged", name
        rows.append({"kind": kind, "name": name, "qp": qp, "prob": prob,
                     "ref": ref.point})
    return {"instances": rows, "elapsed": time.monotonic() - t0}


@pytest.fixture(scope="module")
def tau_runs(corpus):
    """Monitored runs of every corpus instance at each certified step size."""
    t0 = time.monotonic()
    runs = []
    for inst in corpus["instances"]:
        for tau in TAUS:
            ledger = DiagnosticsLedger(reference=inst["ref"])
            out = run_spadmm(
                inst["prob"],
                SPADMMConfig(tau=tau, tol=1e-9, max_iter=100000),
                ledger=ledger,
            )
            assert out.status == "converged", (inst["name"], tau)
            assert len(ledger.rows) == out.iterations >= 1
            runs.append((inst, tau, ledger))
    return {"runs": runs, "elapsed": time.monotonic() - t0}


@pytest.fixture(scope="module")
def cross_validation(corpus):
    """Primal solves versus dual sweeps with per-iteration certificates."""
    rows = []
    for inst in corpus["instances"]:
        qp = inst["qp"]
        primal = run_primal_spadmm(qp, SPADMMConfig(tol=1e-9, max_iter=100000))
        assert primal.inner.status == "converged", inst["name"]

        dual = build_dual_model(qp)
        cfg = SGSConfig(tol=1e-9, max_iter=60000)
        state = SGSState.zeros(dual)
        state.work = SGSWork(dual, cfg)
        scale = certificate_scale(qp)
        primal_x = state.x.copy()
        worst_cert = 0.0
        converged = (
            kkt_residual_dual(dual, state.s, state.y, state.w_hat, state.z,
                              state.x)["norm"] <= cfg.tol * scale
        )
        for _ in range(cfg.max_iter):
            if converged:
                break
            x_old = state.x
            state = sgs_step(dual, cfg, state)
            primal_x = x_old + cfg.sigma * dual.feas_residual(
                state.s, state.y, state.w_hat, state.z
            )
            certs = sgs_optimality_certificates(dual, cfg, state)
            assert len(certs) == 7
            worst_cert = max(worst_cert, max(certs.values()))
            kkt = kkt_residual_dual(
                dual, state.s, state.y, state.w_hat, state.z, state.x
            )
            converged = kkt["norm"] <= cfg.tol * scale
        assert converged, inst["name"]
        gap = duality_gap(
            qp, primal_x, primal_x, state.s, state.y,
            dual.w_full(state.w_hat), state.z,
        )
        rows.append({"name": inst["name"], "obj": primal.inner.objective,
                     "gap": gap, "worst_cert": worst_cert, "scale": scale})
    return rows


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_cone_calculus():
    rng = np.random.default_rng(424242)
    t0 = time.monotonic()

    def kink_safe(p):
        # the finite-difference quotient is first-order accurate only while
        # the step stays clear of the spectral kink at zero, so keep the
        # smallest eigenvalue magnitude well above the largest step used
        while True:
            m = mc.random_sym(rng, p, scale=2.0)
            vals = np.linalg.eigvalsh(m)
            if np.abs(vals).min() > 1e-3 * max(1.0, np.abs(vals).max()):
                return m

    checked = 0
    for p in (2, 5, 20, 60):
        for _ in range(125):
            m = kink_safe(p)
            pos, neg = matcone.project_psd(m), matcone.project_nsd(m)
            tol = 1e-10 * max(1.0, np.linalg.norm(m))
            assert np.linalg.norm(pos + neg - m) <= tol
            assert abs(np.tensordot(pos, neg)) <= tol
            assert np.linalg.eigvalsh(pos).min() >= -tol
            assert np.linalg.eigvalsh(neg).max() <= tol
            assert np.linalg.norm(matcone.project_psd(pos) - pos) <= tol
            assert np.linalg.norm(matcone.project_nsd(neg) - neg) <= tol

            h = mc.random_sym(rng, p)
            deriv = matcone.dir_deriv_proj_nsd(matcone.eig_sym(m), h)
            steps = (1e-4, 1e-5, 1e-6)
            errs = [np.linalg.norm(mc.fd_nsd_derivative(m, h, s) - deriv)
                    for s in steps]
            slope = errs[0] / steps[0]
            # rounding error in the quotient grows like eps/step, so the
            # linear-shrinkage bound carries a 1/step noise allowance
            noise = 1e-14 * (1.0 + np.linalg.norm(m) + np.linalg.norm(h))
            for s, e in zip(steps, errs):
                assert e <= 2.0 * slope * s + noise / s
            checked += 1
    assert checked == 500
    assert time.monotonic() - t0 < 60.0


def test_criterion_02_tangent_pair_suite():
    rng = np.random.default_rng(434343)
    dims = (2, 3, 4, 6)
    for idx in range(200):
        p = dims[idx % len(dims)]
        n_zero = idx % 3
        remaining = p - min(n_zero, p - 1)
        n_pos = (remaining + 1) // 2
        spectrum = np.concatenate([
            rng.uniform(0.5, 3.0, n_pos),
            np.zeros(p - remaining),
            -rng.uniform(0.5, 3.0, remaining - n_pos),
        ])
        c = mc.sym_with_spectrum(rng, spectrum)
        triple = matcone.eig_sym(c)

        # constructed direction pair: four block relations plus the
        # inner-product identity between the two quadratic expressions
        da, db = mc.build_tangent_pair(triple, rng)
        rep = matcone.check_pair_relations(da, db, triple, tol=1e-8)
        assert rep.holds and rep.in_cone
        scale = max(1.0, abs(rep.inner_lhs), abs(rep.inner_rhs))
        assert abs(rep.inner_lhs - rep.inner_rhs) <= 1e-10 * scale

        # polar characterization: sampled cone/polar elements are members
        # and pair non-positively
        vals, vecs = np.linalg.eigh(c)
        order = np.argsort(-vals)
        basis, vals = vecs[:, order], vals[order]
        alpha, beta, gamma = mc.split_indices(vals)
        g = mc.sample_critical_nsd(basis, alpha, beta, gamma, rng)
        h = mc.sample_polar_nsd(basis, alpha, beta, gamma, rng)
        assert matcone.in_critical_cone_nsd(g, triple, tol=1e-8)
        assert matcone.in_polar_critical_cone_nsd(h, triple, tol=1e-8)
        assert float(np.tensordot(g, h)) <= 1e-10 * max(
            1.0, np.linalg.norm(g) * np.linalg.norm(h)
        )

    # box side: every certified membership pair has a nonnegative pairing
    pairs = 0
    while pairs < 1000:
        n = 4
        lo = np.where(rng.random(n) < 0.3, -np.inf, -rng.uniform(0.0, 2.0, n))
        hi = np.where(rng.random(n) < 0.3, np.inf, rng.uniform(0.0, 2.0, n))
        box = BoxSet(lo, hi)
        b = polyset.project_box(box, rng.standard_normal(n))
        a = np.zeros(n)
        for i in range(n):
            if b[i] == lo[i] and rng.random() < 0.7:
                a[i] = abs(rng.standard_normal())
            elif b[i] == hi[i] and rng.random() < 0.7:
                a[i] = -abs(rng.standard_normal())
        codes = polyset.critical_cone_codes(box, b, a)
        dual_codes = polyset.dual_cone_codes(codes)

        def sample(code_list):
            out = rng.standard_normal(n)
            for i, code in enumerate(code_list):
                if code == polyset.ZERO:
                    out[i] = 0.0
                elif code == polyset.NONNEG:
                    out[i] = abs(out[i])
                elif code == polyset.NONPOS:
                    out[i] = -abs(out[i])
            return out

        for _ in range(50):
            u = sample(codes)
            w = sample(dual_codes)
            assert polyset.in_critical_cone_box(box, u, b, a)
            assert polyset.in_S_ba(box, w, b, a)
            assert float(u @ w) >= -1e-12 * (1.0 + abs(u @ w))
            pairs += 1


def test_criterion_03_inequality_ledger(corpus, tau_runs):
    for inst, tau, ledger in tau_runs["runs"]:
        scale = inst["prob"].residual_scale()
        cou = ledger.column("cou_slack")
        les = ledger.column("les11_slack")
        cou = cou[np.isfinite(cou)]
        les = les[np.isfinite(les)]
        assert cou.size and les.size, (inst["name"], tau)
        assert cou.min() >= -1e-9 * scale, (inst["name"], tau)
        assert les.min() >= -1e-8 * scale, (inst["name"], tau)
    assert corpus["elapsed"] + tau_runs["elapsed"] < 600.0


def test_criterion_04_polyhedral_linear_rate(tau_runs, acceptance_notes):
    rates = []
    for inst, tau, ledger in tau_runs["runs"]:
        if inst["kind"] != "qp" or tau != 1.618:
            continue
        ratios, rate = ledger.rate_summary()
        assert ratios.size >= 10, inst["name"]
        assert np.isfinite(rate) and rate < 1.0, inst["name"]
        rates.append(rate)
    assert len(rates) == len(QP_SIZES)
    acceptance_notes(
        4, f"median ratio {np.median(rates):.4f}, worst {max(rates):.4f}"
    )


def test_criterion_05_contraction_constants(corpus):
    root3 = math.sqrt(3.0)
    hand = {
        1.0: (0.25, 0.125),
        1.5: (0.375, 1.0 / 48.0),
        root3: ((5.0 - 2.0 * root3) / 4.0, (1.0 - root3 + 1.0 / root3) / 8.0),
    }
    for tau, (s_want, t_want) in hand.items():
        s, t = stau_ttau(tau)
        assert abs(s - s_want) <= 1e-14
        assert abs(t - t_want) <= 1e-14

    grid = np.linspace(1e-6, GOLDEN - 1e-9, 1000)
    vals = np.array([stau_ttau(t) for t in grid])
    assert vals[:, 0].min() >= 0.25 - 1e-12       # s stays above a quarter
    assert (vals[:, 1] > 0.0).all()               # t positive inside the range
    assert vals[:, 1].max() <= 0.125 + 1e-15      # t peaks at an eighth

    for inst in corpus["instances"]:
        probe = run_spadmm(inst["prob"], SPADMMConfig(max_iter=1, tol=1e-300))
        bundle = OperatorBundle.from_problem(
            inst["prob"], SPADMMConfig(), probe.s_matrix, probe.t_matrix
        )
        # raises on any sampled violation of the operator inequality
        constants, forms = assemble_forms(bundle, eta_estimate=10.0,
                                          n_samples=1000)
        assert constants.mu < 1.0
        assert abs((1.0 + 2.0 * constants.kappa4) * constants.mu
                   - (1.0 + constants.kappa4)) <= 1e-12
        ks = bundle.kappas
        s_tau, t_tau = stau_ttau(bundle.tau)
        gap = (
            ks["kappa"] * forms["H"].matrix
            - min(bundle.tau, 4.0 * t_tau) * forms["H0"].matrix
            - ks["kappa"] * t_tau * bundle.sigma * forms["EEstar"].matrix
        )
        scale = 1.0 + float(np.abs(gap).max(initial=0.0))
        rng = np.random.default_rng(55)
        for _ in range(1000):
            d = rng.standard_normal(gap.shape[0])
            d /= np.linalg.norm(d)
            assert float(d @ gap @ d) >= -1e-9 * scale


def test_criterion_06_positivity_verdict_agreement():
    rng = np.random.default_rng(66)

    def psd_or_zero(d):
        if rng.random() < 0.3:
            return np.zeros((d, d))
        g = rng.standard_normal((d, d))
        return g @ g.T / d + float(rng.uniform(0.0, 0.5)) * np.eye(d)

    checked = 0
    for i in range(50):
        if i % 5 == 4:
            # constructed kernel: wide second map with no proximal make-up
            k = int(rng.integers(1, 3))
            n2 = k + int(rng.integers(1, 3))
            bundle = OperatorBundle(
                adj1=rng.standard_normal((k, k)),
                adj2=rng.standard_normal((k, n2)),
                sigma=float(rng.uniform(0.5, 2.0)), tau=1.0,
                s_matrix=np.eye(k), t_matrix=np.zeros((n2, n2)),
            )
        else:
            k = int(rng.integers(1, 5))
            n1 = int(rng.integers(1, 7))
            n2 = int(rng.integers(1, 7))
            bundle = OperatorBundle(
                adj1=rng.standard_normal((k, n1)),
                adj2=rng.standard_normal((k, n2)),
                sigma=float(rng.uniform(0.3, 3.0)),
                tau=float(rng.choice([0.8, 1.0, 1.5])),
                s_matrix=psd_or_zero(n1), t_matrix=psd_or_zero(n2),
            )
        report = check_pd_equiv(bundle)  # raises on any verdict disagreement
        assert report["agree"] is True
        checked += 1
    assert checked == 50


def test_criterion_07_solver_cross_validation(cross_validation):
    for row in cross_validation:
        tol = 1e-6 * (1.0 + abs(row["obj"]))
        assert abs(row["obj"] - row["gap"]["dual"]) <= tol, row["name"]
        assert abs(row["gap"]["primal"] - row["gap"]["dual"]) <= tol, row["name"]
        assert row["worst_cert"] <= 1e-9 * row["scale"], row["name"]


def test_criterion_08_quadratic_free_trajectory_equivalence():
    cases = [(81, 3, 2), (82, 4, 2), (83, 4, 3), (84, 5, 2), (85, 6, 3)]
    steps = 100
    for seed, p, m in cases:
        qp, _ = generate_qsdp(seed=seed, p=p, m=m, rank_q=0)
        assert qp.quad is None
        sweep = run_sgs_spadmm(qp, SGSConfig(sigma=1.3, tau=1.2, tol=1e-300,
                                             max_iter=steps, history=1))
        engine = run_spadmm(dual_two_block(qp),
                            SPADMMConfig(sigma=1.3, tau=1.2, tol=1e-300,
                                         max_iter=steps, history=1))
        d = qp.dim
        for k in range(steps + 1):
            stacked = engine.history["y"][k]
            assert np.abs(stacked[:d] - sweep.history["s"][k]).max() <= 1e-10
            assert np.abs(stacked[d:] - sweep.history["y"][k]).max() <= 1e-10
            assert np.abs(engine.history["z"][k] - sweep.history["z"][k]).max() <= 1e-10
            assert np.abs(engine.history["x"][k] - sweep.history["x"][k]).max() <= 1e-10


def test_criterion_09_verdict_consistency():
    # ten generated instances with the strict-complementarity toggle on
    generated = [generate_qp(seed=s, strict_comp=True)[0]
                 for s in (11, 12, 13, 14, 15)]
    generated += [generate_qsdp(seed=s, p=p, m=2, strict_comp=True)[0]
                  for s, p in ((21, 3), (22, 3), (23, 4), (24, 4), (25, 5))]
    for qp in generated:
        cert = certify_kkt(qp)
        assert cert.ok and cert.subspace_regime
        rep = thm55_report(cert)
        assert rep["agree"] is True
        assert rep["disagreements"] == []
        statuses = {v.status for v in rep["atoms"].values()
                    if v.status != UNDETERMINED}
        assert statuses == {HOLDS}

    # three constructed degenerate instances: determined verdicts all fail
    flat = ConicQP(space=SpaceSpec.symmetric(2), quad=None, cost=np.zeros(3),
                   con_mat=svec(np.eye(2))[None, :], con_rhs=np.array([2.0]),
                   cone="psd", poly=free_box(3))
    dup = ConicQP(space=SpaceSpec.vector(2), quad=None,
                  cost=np.array([1.0, 1.0]),
                  con_mat=np.array([[1.0, 0.0], [1.0, 0.0]]),
                  con_rhs=np.array([1.0, 1.0]), cone="none",
                  poly=BoxPolyFun(BoxSet(np.zeros(2), np.full(2, np.inf))))
    degenerate = [flat, dup, generate_qp(seed=7, degenerate=True)[0]]
    for qp in degenerate:
        cert = certify_kkt(qp)
        assert cert.ok
        rep = thm55_report(cert)
        assert rep["agree"] is True
        assert rep["determined"]
        assert set(rep["determined"].values()) == {FAILS}


def test_criterion_10_bitwise_reproducibility(tmp_path):
    for family, size in (("qp", ("--n", "8", "--m", "3")),
                         ("qsdp", ("--p", "3", "--m", "2"))):
        files = [tmp_path / f"{family}-{i}.txt" for i in (0, 1)]
        for path in files:
            rc = main(["generate", "--family", family, "--seed", "9", *size,
                       "--strict-comp", "--out", str(path)])
            assert rc == 0
        assert files[0].read_bytes() == files[1].read_bytes()

    problem = tmp_path / "problem.txt"
    rc = main(["generate", "--family", "qp", "--seed", "9", "--n", "8",
               "--m", "3", "--strict-comp", "--out", str(problem)])
    assert rc == 0
    ledgers = []
    for name in ("run-a", "run-b"):
        out = tmp_path / name
        rc = main(["solve-primal", str(problem), "--tol", "1e-9",
                   "--out-dir", str(out)])
        assert rc == 0
        ledgers.append((out / "ledger.csv").read_bytes())
    assert ledgers[0] == ledgers[1]
