"""Sharp BMO-to-BLO bounds for maximal operators on weighted trees.

The package evaluates the explicit extremal (Bellman-type) function that
governs how dyadic-type maximal operators act from BMO into BLO, verifies
its restricted concavity numerically, runs the induction argument on
finite alpha-trees, and reproduces the norm-optimizing sequence showing
that the operator-norm constant is exactly 1.
"""

__version__ = "0.1.0"

from .bellman import (
    BellmanValue,
    Foliation,
    eval_A,
    eval_b,
    eval_B,
    eval_b_prime,
    eval_f,
    eval_F,
    eval_majorant,
    eval_Phi,
    solve_s,
)
from .concavity import ChordSample, SweepReport, check_C2, chord_H, chord_margin, sweep
from .errors import (
    BmobloError,
    ConvergenceError,
    DomainError,
    PreconditionError,
    ResourceError,
    StructureError,
)
from .geometry import (
    AlphaContext,
    OmegaPoint,
    RegionId,
    classify,
    envelope_point,
    make_context,
    shift,
)
from .optimizers import (
    Enclosure,
    PsiFunction,
    PsiParams,
    PsiStats,
    build_psi,
    m_norm_report,
    psi_params,
    psi_stats,
    tensor_stats,
)
from .trees import (
    AlphaTree,
    NodeStats,
    TreeNode,
    blo_norm,
    bmo_norm,
    inf_maximal,
    maximal,
    random_tree,
    stats,
    tree_from_json,
    tree_to_json,
    validate,
    verify_induction,
    verify_main_theorem,
)

__all__ = [
    "AlphaContext",
    "AlphaTree",
    "BellmanValue",
    "BmobloError",
    "ChordSample",
    "ConvergenceError",
    "DomainError",
    "Enclosure",
    "Foliation",
    "NodeStats",
    "OmegaPoint",
    "PreconditionError",
    "PsiFunction",
    "PsiParams",
    "PsiStats",
    "RegionId",
    "ResourceError",
    "StructureError",
    "SweepReport",
    "TreeNode",
    "blo_norm",
    "bmo_norm",
    "build_psi",
    "check_C2",
    "chord_H",
    "chord_margin",
    "classify",
    "envelope_point",
    "eval_A",
    "eval_B",
    "eval_F",
    "eval_Phi",
    "eval_b",
    "eval_b_prime",
    "eval_f",
    "eval_majorant",
    "inf_maximal",
    "m_norm_report",
    "make_context",
    "maximal",
    "psi_params",
    "psi_stats",
    "random_tree",
    "shift",
    "solve_s",
    "stats",
    "sweep",
    "tensor_stats",
    "tree_from_json",
    "tree_to_json",
    "validate",
    "verify_induction",
    "verify_main_theorem",
]
