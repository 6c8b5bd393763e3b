"""Semi-proximal splitting solvers for conic quadratic programs.

The package covers one pipeline end to end:

* :mod:`spadmm.matcone` / :mod:`spadmm.polyset` — projection calculus for
  the semidefinite cone (eigenvalue form) and for boxes, including
  directional derivatives and critical-cone membership;
* :mod:`spadmm.model` — the conic-QP data model, its two-block primal
  embedding and its reduced dual, packed symmetric storage, first-order
  residual maps;
* :mod:`spadmm.solver` — the semi-proximal two-block splitting solver;
* :mod:`spadmm.sgs` — the symmetric sweep variant for the reduced dual;
* :mod:`spadmm.diagnostics` — per-iteration inequality ledger and all
  contraction constants of the linear-rate analysis;
* :mod:`spadmm.vananalysis` — certification of first-order points and
  exact or conservative second-order condition checks;
* :mod:`spadmm.cli` — problem files, instance generators and the command
  line driver.
"""

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    InputError,
    NumericalError,
    SpadmmError,
    StepError,
)
from .model import (
    BoxPolyFun,
    ConicQP,
    DualModel,
    KKTPoint,
    SpaceSpec,
    TwoBlockProblem,
    WeightedL1,
    build_dual_model,
    duality_gap,
    kkt_residual_dual,
    kkt_residual_primal,
    primal_two_block,
    smat,
    svec,
    svec_dim,
)
from .polyset import BoxSet
from .solver import GOLDEN, SPADMMConfig, SolveResult, run_primal_spadmm, run_spadmm
from .sgs import SGSConfig, SGSResult, dual_two_block, run_sgs_spadmm
from .diagnostics import (
    DiagnosticsLedger,
    OperatorBundle,
    RateConstants,
    assemble_forms,
    check_b8,
    check_cou,
    check_les11,
    check_pd_equiv,
    read_ledger_csv,
    stau_ttau,
)
from .vananalysis import (
    CertifiedKKT,
    ConditionVerdict,
    certify_kkt,
    dd_system_test,
    sosc_dual,
    sosc_primal,
    srcq_dual,
    srcq_primal,
    thm55_report,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SpadmmError", "InputError", "DimensionError", "DomainError",
    "ConfigError", "NumericalError", "StepError",
    "SpaceSpec", "ConicQP", "BoxPolyFun", "WeightedL1", "BoxSet",
    "TwoBlockProblem", "KKTPoint", "DualModel",
    "svec", "smat", "svec_dim",
    "primal_two_block", "build_dual_model", "dual_two_block",
    "kkt_residual_primal", "kkt_residual_dual", "duality_gap",
    "GOLDEN", "SPADMMConfig", "SolveResult", "run_spadmm", "run_primal_spadmm",
    "SGSConfig", "SGSResult", "run_sgs_spadmm",
    "DiagnosticsLedger", "OperatorBundle", "RateConstants",
    "assemble_forms", "check_cou", "check_les11", "check_b8",
    "check_pd_equiv", "read_ledger_csv", "stau_ttau",
    "CertifiedKKT", "ConditionVerdict", "certify_kkt",
    "sosc_primal", "sosc_dual", "srcq_primal", "srcq_dual",
    "dd_system_test", "thm55_report",
]
