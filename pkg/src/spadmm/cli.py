"""Command-line front end.

Provides a small text format for conic-QP problem files, seeded instance
generators, and four driver commands:

* ``generate``       — write a reproducible random instance;
* ``solve-primal``   — run the two-block splitting solver on the primal
  embedding, with per-iteration instrumentation;
* ``solve-dual-sgs`` — run the sweep solver on the reduced dual;
* ``diagnose``       — inspect a recorded run ledger and flag violated
  per-iteration inequalities;
* ``analyze``        — certify a first-order point and evaluate the
  second-order condition checks.

Exit codes: 0 success/converged, 1 input error, 2 iteration budget
exhausted (or, for ``diagnose``, violated inequalities within the certified
step-size range), 3 divergence, 4 internal contradiction between exact
condition verdicts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Optional, Tuple

import numpy as np

from .diagnostics import (
    COU_TOL,
    LES11_TOL,
    DiagnosticsLedger,
    LEDGER_COLUMNS,
    LEDGER_MAGIC,
    empirical_rate,
    read_ledger_csv,
    stau_ttau,
)
from .errors import InputError, SpadmmError
from .model import (
    BoxPolyFun,
    ConicQP,
    KKTPoint,
    SpaceSpec,
    WeightedL1,
    svec,
    svec_dim,
)
from .polyset import BoxSet
from .sgs import SGSConfig, run_sgs_spadmm
from .solver import SPADMMConfig, run_primal_spadmm
from . import vananalysis

__all__ = [
    "PROBLEM_MAGIC",
    "dump_problem",
    "loads_problem",
    "load_problem",
    "save_problem",
    "generate_qp",
    "generate_qsdp",
    "main",
]

PROBLEM_MAGIC = "# spadmm problem v1"
_STORAGE_NOTE = (
    "# packed symmetric storage: row-major upper triangle, "
    "off-diagonals scaled by sqrt(2)"
)
SOLUTION_MAGIC = "# spadmm solution v1"


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _fmt_row(arr) -> str:
    return " ".join(_fmt(v) for v in np.asarray(arr, dtype=float).ravel())


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------


def dump_problem(qp: ConicQP, reference: Optional[dict] = None) -> str:
    """Serialize a problem (and optional reference solution) to text."""
    n, m = qp.dim, qp.n_eq
    lines = [PROBLEM_MAGIC, _STORAGE_NOTE]
    if qp.cone == "psd":
        lines.append(f"space psd {qp.space.side}")
    else:
        lines.append(f"space vector {n}")
    if qp.quad is None:
        lines.append("Q zero")
    else:
        diag = np.diag_indices(n)
        off = qp.quad - np.diag(np.diag(qp.quad))
        d = np.diag(qp.quad)
        if not off.any() and d.size and np.all(d == d[0]):
            lines.append(f"Q identity {_fmt(d[0])}")
        else:
            lines.append("Q dense")
            for i in range(n):
                lines.append(_fmt_row(qp.quad[i]))
    lines.append(f"c {_fmt_row(qp.cost)}".rstrip())
    lines.append(f"A {m}")
    for i in range(m):
        lines.append(_fmt_row(qp.con_mat[i]))
    lines.append(f"b {_fmt_row(qp.con_rhs)}".rstrip())
    if isinstance(qp.poly, BoxPolyFun):
        lines.append("phi box")
        lines.append(f"lower {_fmt_row(qp.poly.box.lower)}")
        lines.append(f"upper {_fmt_row(qp.poly.box.upper)}")
    elif isinstance(qp.poly, WeightedL1):
        lines.append("phi l1")
        lines.append(f"weights {_fmt_row(qp.poly.weights)}")
    else:
        raise InputError(
            f"cannot serialize polyhedral term of type {type(qp.poly).__name__}"
        )
    if reference is not None:
        lines.append("ref")
        for key, length in (("x", n), ("u", n), ("y", m), ("z", n)):
            arr = np.asarray(reference[key], dtype=float)
            if arr.shape != (length,):
                raise InputError(f"reference vector {key!r} has wrong length")
            lines.append(f"{key} {_fmt_row(arr)}".rstrip())
    return "\n".join(lines) + "\n"


def save_problem(qp: ConicQP, path: str, reference: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_problem(qp, reference))


class _LineReader:
    """Sequential reader over content lines with line-anchored errors."""

    def __init__(self, text: str, name: str):
        self.name = name
        raw = text.splitlines()
        if not raw or raw[0].strip() != PROBLEM_MAGIC:
            raise InputError(f"{name}:1: not a problem file (bad magic line)")
        self.items = [
            (i, line.split())
            for i, line in enumerate(raw, 1)
            if i > 1 and line.strip() and not line.lstrip().startswith("#")
        ]
        self.pos = 0

    def error(self, lineno: int, msg: str):
        raise InputError(f"{self.name}:{lineno}: {msg}")

    def at_end(self) -> bool:
        return self.pos >= len(self.items)

    def take(self, what: str) -> Tuple[int, list]:
        if self.at_end():
            last = self.items[-1][0] if self.items else 1
            raise InputError(f"{self.name}:{last}: unexpected end of file, expected {what}")
        item = self.items[self.pos]
        self.pos += 1
        return item

    def floats(self, tokens, count: int, lineno: int, what: str) -> np.ndarray:
        if len(tokens) != count:
            self.error(lineno, f"{what}: expected {count} values, got {len(tokens)}")
        try:
            return np.array([float(t) for t in tokens], dtype=float)
        except ValueError:
            self.error(lineno, f"{what}: non-numeric value")


def loads_problem(text: str, name: str = "<string>"):
    """Parse problem text into ``(problem, reference-or-None)``.

    Every dimension cross-check is enforced during the parse and failures
    carry the offending line number.
    """
    rd = _LineReader(text, name)

    lineno, tok = rd.take("space section")
    if len(tok) != 3 or tok[0] != "space" or tok[1] not in ("vector", "psd"):
        rd.error(lineno, "expected 'space vector N' or 'space psd P'")
    try:
        size = int(tok[2])
    except ValueError:
        rd.error(lineno, "space size must be an integer")
    if size <= 0:
        rd.error(lineno, "space size must be positive")
    if tok[1] == "psd":
        space, cone = SpaceSpec.symmetric(size), "psd"
    else:
        space, cone = SpaceSpec.vector(size), "none"
    n = space.dim

    lineno, tok = rd.take("Q section")
    if not tok or tok[0] != "Q":
        rd.error(lineno, "expected 'Q zero|identity SCALE|dense'")
    if tok[1:] == ["zero"]:
        quad = None
    elif len(tok) == 3 and tok[1] == "identity":
        try:
            s = float(tok[2])
        except ValueError:
            rd.error(lineno, "identity scale must be numeric")
        quad = s * np.eye(n)
    elif tok[1:] == ["dense"]:
        rows = []
        for _ in range(n):
            rl, rt = rd.take("quadratic matrix row")
            rows.append(rd.floats(rt, n, rl, "quadratic matrix row"))
        quad = np.vstack(rows)
    else:
        rd.error(lineno, "expected 'Q zero|identity SCALE|dense'")

    lineno, tok = rd.take("c section")
    if not tok or tok[0] != "c":
        rd.error(lineno, "expected cost section 'c ...'")
    cost = rd.floats(tok[1:], n, lineno, "cost vector")

    lineno, tok = rd.take("A section")
    if len(tok) != 2 or tok[0] != "A":
        rd.error(lineno, "expected constraint section 'A M'")
    try:
        m = int(tok[1])
    except ValueError:
        rd.error(lineno, "constraint row count must be an integer")
    if m < 0:
        rd.error(lineno, "constraint row count must be nonnegative")
    rows = []
    for _ in range(m):
        rl, rt = rd.take("constraint row")
        rows.append(rd.floats(rt, n, rl, "constraint row"))
    con_mat = np.vstack(rows) if rows else np.zeros((0, n))

    lineno, tok = rd.take("b section")
    if not tok or tok[0] != "b":
        rd.error(lineno, "expected right-hand side section 'b ...'")
    con_rhs = rd.floats(tok[1:], m, lineno, "right-hand side")

    lineno, tok = rd.take("phi section")
    if len(tok) != 2 or tok[0] != "phi" or tok[1] not in ("box", "l1"):
        rd.error(lineno, "expected 'phi box' or 'phi l1'")
    if tok[1] == "box":
        ll, lt = rd.take("lower bounds")
        if not lt or lt[0] != "lower":
            rd.error(ll, "expected 'lower ...'")
        lower = rd.floats(lt[1:], n, ll, "lower bounds")
        ul, ut = rd.take("upper bounds")
        if not ut or ut[0] != "upper":
            rd.error(ul, "expected 'upper ...'")
        upper = rd.floats(ut[1:], n, ul, "upper bounds")
        try:
            poly = BoxPolyFun(BoxSet(lower, upper))
        except SpadmmError as exc:
            rd.error(ul, f"invalid box bounds: {exc}")
    else:
        wl, wt = rd.take("l1 weights")
        if not wt or wt[0] != "weights":
            rd.error(wl, "expected 'weights ...'")
        weights = rd.floats(wt[1:], n, wl, "l1 weights")
        try:
            poly = WeightedL1(weights)
        except SpadmmError as exc:
            rd.error(wl, f"invalid l1 weights: {exc}")

    reference = None
    if not rd.at_end():
        lineno, tok = rd.take("reference block")
        if tok != ["ref"]:
            rd.error(lineno, f"unexpected content {' '.join(tok)!r}")
        reference = {}
        for key, length in (("x", n), ("u", n), ("y", m), ("z", n)):
            rl, rt = rd.take(f"reference vector {key!r}")
            if not rt or rt[0] != key:
                rd.error(rl, f"expected reference vector {key!r}")
            reference[key] = rd.floats(rt[1:], length, rl, f"reference vector {key!r}")
    if not rd.at_end():
        lineno, tok = rd.take("end of file")
        rd.error(lineno, f"trailing content {' '.join(tok)!r}")

    try:
        qp = ConicQP(space, quad, cost, con_mat, con_rhs, cone, poly)
    except SpadmmError as exc:
        raise InputError(f"{name}: inconsistent problem data: {exc}") from exc
    return qp, reference


def load_problem(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read problem file: {exc}") from exc
    return loads_problem(text, name=path)


# ---------------------------------------------------------------------------
# instance generators
# ---------------------------------------------------------------------------


def _random_orthogonal(rng, size: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    return q * np.sign(np.diag(r))


def _random_psd(rng, n: int, rank: int) -> Optional[np.ndarray]:
    if rank == 0:
        return None
    v = _random_orthogonal(rng, n)[:, :rank]
    d = 0.5 + rng.random(rank)
    q = (v * d) @ v.T
    return 0.5 * (q + q.T)


def _design_box(rng, x_bar, active_idx, at_lower):
    """Bounds touching ``x_bar`` exactly on the chosen active coordinates."""
    n = x_bar.size
    lower = x_bar - (0.5 + rng.random(n))
    upper = x_bar + (0.5 + rng.random(n))
    loose = rng.random(n) < 0.25
    inactive = np.ones(n, dtype=bool)
    inactive[active_idx] = False
    lower[loose & inactive] = -math.inf
    upper[(rng.random(n) < 0.25) & inactive] = math.inf
    z_bar = np.zeros(n)
    for i, lo_side in zip(active_idx, at_lower):
        if lo_side:
            lower[i] = x_bar[i]
            z_bar[i] = 0.5 + rng.random()
        else:
            upper[i] = x_bar[i]
            z_bar[i] = -(0.5 + rng.random())
    return lower, upper, z_bar


def generate_qp(
    seed: int = 0,
    n: int = 8,
    m: int = 3,
    rank_q: Optional[int] = None,
    strict_comp: bool = False,
    degenerate: bool = False,
):
    """Seeded convex-QP instance (vector variable, box term).

    ``strict_comp`` plants a first-order point with strictly complementary
    box activity (returned as the reference block); ``degenerate`` plants
    the same kind of point but duplicates a constraint row, so the
    multiplier set is a line.  Without either toggle the instance is plain
    random (feasible and bounded, no reference).
    """
    if strict_comp and degenerate:
        raise InputError(
            "contradictory toggles: strict complementarity excludes forced degeneracy"
        )
    if rank_q is None:
        rank_q = n
    if not 0 <= rank_q <= n:
        raise InputError(f"rank_q must be in [0, {n}], got {rank_q}")
    rng = np.random.default_rng(seed)
    space = SpaceSpec.vector(n)

    if degenerate:
        m = max(m, 2)
    if m >= n:
        raise InputError(f"need fewer constraints than variables, got m={m}, n={n}")
    quad = _random_psd(rng, n, rank_q)

    if not (strict_comp or degenerate):
        x_feas = 0.5 * rng.standard_normal(n)
        lower = x_feas - (0.5 + rng.random(n))
        upper = x_feas + (0.5 + rng.random(n))
        con_mat = rng.standard_normal((m, n))
        qp = ConicQP(
            space, quad, rng.standard_normal(n), con_mat, con_mat @ x_feas,
            "none", BoxPolyFun(BoxSet(lower, upper)),
        )
        return qp, None

    x_bar = rng.standard_normal(n)
    n_act = max(1, min(n - m - 1, n // 3))
    active_idx = np.sort(rng.choice(n, size=n_act, replace=False))
    at_lower = rng.random(n_act) < 0.5
    lower, upper, z_bar = _design_box(rng, x_bar, active_idx, at_lower)
    con_mat = rng.standard_normal((m, n))
    if degenerate:
        con_mat[m - 1] = 2.0 * con_mat[0]
    y_bar = rng.standard_normal(m)
    q_x = quad @ x_bar if quad is not None else np.zeros(n)
    cost = con_mat.T @ y_bar + z_bar - q_x
    qp = ConicQP(
        space, quad, cost, con_mat, con_mat @ x_bar,
        "none", BoxPolyFun(BoxSet(lower, upper)),
    )
    reference = {"x": x_bar, "u": x_bar.copy(), "y": y_bar, "z": z_bar}
    return qp, reference


def generate_qsdp(
    seed: int = 0,
    p: int = 5,
    m: int = 2,
    rank_q: Optional[int] = None,
    strict_comp: bool = False,
    degenerate: bool = False,
):
    """Seeded semidefinite instance (matrix variable, box term).

    ``strict_comp`` plants a strictly complementary first-order point: the
    conic variable and its slack have complementary eigenspaces with no
    shared kernel, and every active box coordinate carries a strictly
    signed multiplier.  ``degenerate`` plants a point whose multiplier set
    is provably non-unique (zero quadratic term, one duplicated constraint
    row, no box activity).  The toggles are mutually exclusive.
    """
    if strict_comp and degenerate:
        raise InputError(
            "contradictory toggles: strict complementarity excludes forced degeneracy"
        )
    n = svec_dim(p)
    if degenerate:
        if rank_q not in (None, 0):
            raise InputError(
                "contradictory toggles: the degenerate family needs a zero "
                "quadratic term"
            )
        rank_q = 0
    if rank_q is None:
        rank_q = n
    if not 0 <= rank_q <= n:
        raise InputError(f"rank_q must be in [0, {n}], got {rank_q}")
    if p < 2:
        raise InputError("matrix side must be at least 2")
    rng = np.random.default_rng(seed)
    space = SpaceSpec.symmetric(p)
    quad = _random_psd(rng, n, rank_q)

    if not (strict_comp or degenerate):
        g = rng.standard_normal((p, p))
        x_feas = svec(g @ g.T + 0.1 * np.eye(p))
        lower = x_feas - (0.5 + rng.random(n))
        upper = x_feas + (0.5 + rng.random(n))
        con_mat = rng.standard_normal((m, n))
        qp = ConicQP(
            space, quad, rng.standard_normal(n), con_mat, con_mat @ x_feas,
            "psd", BoxPolyFun(BoxSet(lower, upper)),
        )
        return qp, None

    basis = _random_orthogonal(rng, p)
    n_neg = 2 if p >= 4 else 1
    n_pos = p - n_neg
    pos_cols, neg_cols = basis[:, :n_pos], basis[:, n_pos:]
    lam_pos = 0.5 + rng.random(n_pos)
    lam_neg = 0.5 + rng.random(n_neg)
    x_mat = (pos_cols * lam_pos) @ pos_cols.T
    s_mat = (neg_cols * lam_neg) @ neg_cols.T
    x_bar = svec(0.5 * (x_mat + x_mat.T))
    s_bar = svec(0.5 * (s_mat + s_mat.T))

    if degenerate:
        m = max(m, 2)
        lower = x_bar - (1.0 + rng.random(n))
        upper = x_bar + (1.0 + rng.random(n))
        z_bar = np.zeros(n)
        con_mat = rng.standard_normal((m, n))
        con_mat[m - 1] = 2.0 * con_mat[0]
    else:
        g_s = n_neg * (n_neg + 1) // 2
        n_act = max(1, min(n - m - g_s - 1, 4))
        active_idx = np.sort(rng.choice(n, size=n_act, replace=False))
        at_lower = rng.random(n_act) < 0.5
        lower, upper, z_bar = _design_box(rng, x_bar, active_idx, at_lower)
        con_mat = rng.standard_normal((m, n))
    y_bar = rng.standard_normal(m)
    q_x = quad @ x_bar if quad is not None else np.zeros(n)
    cost = s_bar + con_mat.T @ y_bar + z_bar - q_x
    qp = ConicQP(
        space, quad, cost, con_mat, con_mat @ x_bar,
        "psd", BoxPolyFun(BoxSet(lower, upper)),
    )
    reference = {"x": x_bar, "u": x_bar.copy(), "y": y_bar, "z": z_bar}
    return qp, reference


# ---------------------------------------------------------------------------
# shared command plumbing
# ---------------------------------------------------------------------------


def _out_dir(args) -> str:
    out = args.out_dir or os.environ.get("SPADMM_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _parse_history(text: str):
    if text in ("none", "full"):
        return text
    if text.startswith("stride:"):
        try:
            k = int(text[len("stride:"):])
        except ValueError:
            raise InputError(f"bad history stride in {text!r}")
        if k <= 0:
            raise InputError("history stride must be positive")
        return k
    raise InputError(f"history must be 'none', 'full', or 'stride:K', got {text!r}")


def _make_config(args, cls):
    """Build a solver config from an optional JSON file plus flag overrides."""
    data = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"{args.config}: config must be a JSON object")
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise InputError(f"{args.config}: unknown config keys: {', '.join(unknown)}")
    if args.tau is not None:
        data["tau"] = args.tau
    if args.sigma is not None:
        data["sigma"] = args.sigma
    if args.tol is not None:
        data["tol"] = args.tol
    if args.max_iter is not None:
        data["max_iter"] = args.max_iter
    if args.history is not None:
        data["history"] = _parse_history(args.history)
    return cls(**data)


def _reference_point(qp: ConicQP, reference: Optional[dict]) -> Optional[KKTPoint]:
    """Map a problem-file reference block onto the primal-embedding iterate."""
    if reference is None:
        return None
    mult = np.concatenate([-reference["y"], -reference["z"]])
    return KKTPoint(x=mult, y=reference["x"], z=reference["u"])


def _write_solution(path: str, scalars: dict, vectors: dict) -> None:
    lines = [SOLUTION_MAGIC]
    for key, val in scalars.items():
        lines.append(f"{key} {val}")
    for key, arr in vectors.items():
        lines.append(f"{key} {_fmt_row(arr)}".rstrip())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


_STATUS_EXIT = {"converged": 0, "uncertified": 2, "max_iter": 2, "diverged": 3}


def _constants_text(ledger: DiagnosticsLedger) -> str:
    """Scalar-constant dump for a recorded run.

    The error-bound-dependent entries need a reference point; without one
    they are reported as nan rather than omitted, so downstream parsers see
    a fixed key set.
    """
    bundle = ledger.bundle
    s_tau, t_tau = stau_ttau(bundle.tau)
    eta = float("nan")
    if ledger.reference is not None and ledger.rows:
        try:
            eta = ledger.eta_estimate()
        except SpadmmError:
            eta = float("nan")
    if np.isfinite(eta) and eta > 0:
        from .diagnostics import assemble_forms

        constants, _ = assemble_forms(bundle, eta)
        return constants.dump()
    ks = bundle.kappas
    vals = {
        "tau": bundle.tau,
        "sigma": bundle.sigma,
        "s_tau": s_tau,
        "t_tau": t_tau,
        "kappa1": ks["kappa1"],
        "kappa2": ks["kappa2"],
        "kappa3": ks["kappa3"],
        "kappa": ks["kappa"],
        "lam_aa": bundle.lam_aa,
        "lam_bb": bundle.lam_bb,
        "lam_max_m": bundle.form_m.max_eig_power(),
        "eta": float("nan"),
        "kappa4": float("nan"),
        "kappa5": float("nan"),
        "mu": float("nan"),
    }
    return "\n".join(f"{k} = {v:.17g}" for k, v in vals.items())


def _write_scalar_constants(path: str, tau: float, sigma: float) -> None:
    s_tau, t_tau = stau_ttau(tau)
    vals = {"tau": tau, "sigma": sigma, "s_tau": s_tau, "t_tau": t_tau}
    keys = (
        "kappa1", "kappa2", "kappa3", "kappa", "lam_aa", "lam_bb",
        "lam_max_m", "eta", "kappa4", "kappa5", "mu",
    )
    vals.update({k: float("nan") for k in keys})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(f"{k} = {v:.17g}" for k, v in vals.items()) + "\n")


def _write_history_ledger(path: str, ks, residuals, tau, sigma, tau_in_range, scale):
    """Residual-only ledger in the standard CSV layout (analysis columns nan)."""
    lines = [LEDGER_MAGIC]
    lines.append(f"# tau={tau:.17g}")
    lines.append(f"# sigma={sigma:.17g}")
    lines.append(f"# tau_in_range={int(tau_in_range)}")
    lines.append(f"# scale={scale:.17g}")
    lines.append(",".join(LEDGER_COLUMNS))
    for k, r in zip(ks, residuals):
        fields = [str(int(k)), f"{float(r):.17g}"] + ["nan"] * (len(LEDGER_COLUMNS) - 2)
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    common = dict(
        seed=args.seed or 0,
        rank_q=args.rank_q,
        strict_comp=args.strict_comp,
        degenerate=args.degenerate,
    )
    if args.family == "qp":
        qp, ref = generate_qp(
            n=args.n if args.n is not None else 8,
            m=args.m if args.m is not None else 3,
            **common,
        )
    else:
        qp, ref = generate_qsdp(
            p=args.p if args.p is not None else 5,
            m=args.m if args.m is not None else 2,
            **common,
        )
    text = dump_problem(qp, ref)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_solve_primal(args) -> int:
    qp, reference = load_problem(args.problem)
    config = _make_config(args, SPADMMConfig)
    ledger = DiagnosticsLedger(reference=_reference_point(qp, reference))
    result = run_primal_spadmm(qp, config, ledger=ledger)
    out = _out_dir(args)
    inner = result.inner
    _write_solution(
        os.path.join(out, "solution.txt"),
        {
            "command": "solve-primal",
            "status": inner.status,
            "iterations": inner.iterations,
            "objective": _fmt(inner.objective),
            "residual_norm": _fmt(inner.residual_norm),
            "residual_scale": _fmt(inner.residual_scale),
        },
        {
            "x": result.x,
            "u": result.u,
            "y": result.eq_mult,
            "z": result.poly_mult,
        },
    )
    ledger.write_csv(os.path.join(out, "ledger.csv"))
    with open(os.path.join(out, "constants.txt"), "w", encoding="utf-8") as fh:
        fh.write(_constants_text(ledger) + "\n")
    print(
        f"solve-primal: {inner.status} after {inner.iterations} iterations, "
        f"residual {inner.residual_norm:.3e} (scale {inner.residual_scale:.3e})"
    )
    return _STATUS_EXIT[inner.status]


def cmd_solve_dual_sgs(args) -> int:
    qp, _reference = load_problem(args.problem)
    config = _make_config(args, SGSConfig)
    config.validate()
    result = run_sgs_spadmm(qp, config)
    out = _out_dir(args)
    _write_solution(
        os.path.join(out, "solution.txt"),
        {
            "command": "solve-dual-sgs",
            "status": result.status,
            "iterations": result.iterations,
            "objective": _fmt(result.gap["dual"]),
            "primal_objective": _fmt(result.gap["primal"]),
            "residual_norm": _fmt(result.residual_norm),
            "residual_scale": _fmt(result.residual_scale),
        },
        {
            "x": result.primal_x,
            "s": result.s,
            "y": result.y,
            "z": result.z,
        },
    )
    _write_history_ledger(
        os.path.join(out, "ledger.csv"),
        result.history["k"],
        result.history["residual"],
        config.tau,
        config.sigma,
        result.tau_in_range,
        result.residual_scale,
    )
    _write_scalar_constants(
        os.path.join(out, "constants.txt"), config.tau, config.sigma
    )
    print(
        f"solve-dual-sgs: {result.status} after {result.iterations} iterations, "
        f"residual {result.residual_norm:.3e} (scale {result.residual_scale:.3e})"
    )
    return _STATUS_EXIT[result.status]


def cmd_diagnose(args) -> int:
    data = read_ledger_csv(args.ledger)
    meta, columns = data["meta"], data["columns"]
    scale = meta["scale"]
    in_range = bool(meta["tau_in_range"])
    cou = columns["cou_slack"]
    les = columns["les11_slack"]
    cou_bad = int(np.sum(np.isfinite(cou) & (cou < -COU_TOL * scale)))
    les_bad = int(np.sum(np.isfinite(les) & (les < -LES11_TOL * scale)))
    _, rate = empirical_rate(columns["ratio"])

    def _min_or_nan(arr):
        fin = arr[np.isfinite(arr)]
        return float(fin.min()) if fin.size else float("nan")

    print(f"diagnose: {cou.size} recorded iterations, tau={meta['tau']:.6g} "
          f"({'inside' if in_range else 'OUTSIDE'} the certified range)")
    print(f"  coupling-inequality slack: min {_min_or_nan(cou):.3e}, "
          f"violations {cou_bad}")
    print(f"  descent-inequality slack:  min {_min_or_nan(les):.3e}, "
          f"violations {les_bad}")
    if np.isfinite(rate):
        print(f"  tail contraction ratio (geometric mean): {rate:.6f}")
    if cou_bad + les_bad == 0:
        print("  all asserted per-iteration inequalities hold")
        return 0
    if not in_range:
        print("  violations are not asserted: step size is outside the certified range")
        return 0
    print("  asserted inequality violations detected")
    return 2


def cmd_analyze(args) -> int:
    qp, _reference = load_problem(args.problem)
    tol = args.tol if args.tol is not None else 1e-7
    solver_cfg = None
    if args.config or args.tau is not None or args.sigma is not None \
            or args.max_iter is not None or args.history is not None:
        solver_cfg = _make_config(args, SGSConfig)
        solver_cfg.tol = min(solver_cfg.tol, 1e-11)
    cert = vananalysis.certify_kkt(qp, tol=tol, config=solver_cfg)
    out = _out_dir(args)
    if not cert.ok:
        with open(os.path.join(out, "analysis.json"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"certificate": cert.summary()}, indent=2))
        print(f"analyze: certification failed: {cert.reason}", file=sys.stderr)
        return 1
    try:
        report = vananalysis.thm55_report(
            cert, force_inconsistent=args.force_inconsistent
        )
    except AssertionError as exc:
        print(f"analyze: internal contradiction: {exc}", file=sys.stderr)
        return 4
    with open(os.path.join(out, "analysis.json"), "w", encoding="utf-8") as fh:
        fh.write(vananalysis.report_to_json(report))
    print(f"analyze: certified point (residuals {cert.fp_norm:.3e} primal, "
          f"{cert.fd_norm:.3e} dual; scale {cert.scale:.3e})")
    print(f"  subspace regime: {cert.subspace_regime}")
    for name, verdict in report["atoms"].items():
        print(f"  {name:12s} {verdict.status:12s} [{verdict.method}]")
    for name, item in report["items"].items():
        print(f"  {name:20s} {item['status']}")
    print(f"  determined verdicts agree: {report['agree']}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_solver_flags(sub) -> None:
    sub.add_argument("--config", help="JSON file with solver configuration fields")
    sub.add_argument("--tau", type=float, help="step-size factor")
    sub.add_argument("--sigma", type=float, help="penalty parameter")
    sub.add_argument("--tol", type=float, help="relative stopping tolerance")
    sub.add_argument("--max-iter", type=int, help="iteration budget")
    sub.add_argument("--history", help="iterate history: none, full, or stride:K")
    sub.add_argument("--out-dir", help="output directory (default: $SPADMM_OUT_DIR or .)")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spadmm", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="write a seeded random instance")
    gen.add_argument("--family", choices=("qp", "qsdp"), required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n", type=int, help="vector dimension (qp family)")
    gen.add_argument("--p", type=int, help="matrix side (qsdp family)")
    gen.add_argument("--m", type=int, help="number of equality constraints")
    gen.add_argument("--rank-q", type=int, help="rank of the quadratic term")
    gen.add_argument("--strict-comp", action="store_true",
                     help="plant a strictly complementary reference point")
    gen.add_argument("--degenerate", action="store_true",
                     help="plant a point with a non-unique multiplier")
    gen.add_argument("--out", help="output file (default: stdout)")
    gen.set_defaults(handler=cmd_generate)

    sp = subs.add_parser("solve-primal", help="run the primal-embedding solver")
    sp.add_argument("problem", help="problem file")
    _add_solver_flags(sp)
    sp.set_defaults(handler=cmd_solve_primal)

    sd = subs.add_parser("solve-dual-sgs", help="run the dual sweep solver")
    sd.add_argument("problem", help="problem file")
    _add_solver_flags(sd)
    sd.set_defaults(handler=cmd_solve_dual_sgs)

    dg = subs.add_parser("diagnose", help="check a recorded run ledger")
    dg.add_argument("ledger", help="ledger CSV file")
    dg.set_defaults(handler=cmd_diagnose)

    an = subs.add_parser("analyze", help="certify a solution and run condition checks")
    an.add_argument("problem", help="problem file")
    _add_solver_flags(an)
    an.add_argument("--force-inconsistent", action="store_true",
                    help=argparse.SUPPRESS)
    an.set_defaults(handler=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SpadmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
