"""Price bounds for multi-period martingale optimal transport on discrete marginals."""

from .measures import (
    DiscreteMeasure,
    MarginalSequence,
    ConvexOrderResult,
    SequenceReport,
    convex_order_check,
    potential,
    quantize_lognormal,
    split_atom,
    validate_sequence,
)
from .envelope import (
    EnvelopeResult,
    GridFunction,
    OutOfDomainError,
    biconjugate_eval,
    concave_envelope,
    convex_envelope,
    envelope_weights,
    eval_envelope,
)
from .cascade import (
    CascadeTensors,
    CostSpec,
    DualCertificate,
    DualVariables,
    SubhedgeReport,
    cascade_down,
    cascade_down_stepwise,
    dual_objective,
    dual_subgradient,
    dual_value_and_subgradient,
    terminal_tensor,
    verify_subhedge,
)
from .primal import (
    Coupling,
    CouplingReport,
    LpProblem,
    PrimalSolution,
    SizeCapError,
    assemble_lp,
    brute_force_value,
    multipliers_to_semistatic,
    semistatic_value_check,
    simplex_solve,
    solve_primal,
    solve_primal_max,
    validate_coupling,
)
from .ascent import (
    AscentConfig,
    AscentTrace,
    CertifyReport,
    ascend,
    certify,
    descend_upper,
    relative_gap,
)

__all__ = [
    "AscentConfig",
    "AscentTrace",
    "CascadeTensors",
    "CertifyReport",
    "ConvexOrderResult",
    "CostSpec",
    "Coupling",
    "CouplingReport",
    "DiscreteMeasure",
    "DualCertificate",
    "DualVariables",
    "EnvelopeResult",
    "GridFunction",
    "LpProblem",
    "MarginalSequence",
    "OutOfDomainError",
    "PrimalSolution",
    "SequenceReport",
    "SizeCapError",
    "SubhedgeReport",
    "ascend",
    "assemble_lp",
    "biconjugate_eval",
    "brute_force_value",
    "cascade_down",
    "cascade_down_stepwise",
    "certify",
    "concave_envelope",
    "convex_envelope",
    "convex_order_check",
    "descend_upper",
    "dual_objective",
    "dual_subgradient",
    "dual_value_and_subgradient",
    "envelope_weights",
    "eval_envelope",
    "multipliers_to_semistatic",
    "potential",
    "quantize_lognormal",
    "relative_gap",
    "semistatic_value_check",
    "simplex_solve",
    "solve_primal",
    "solve_primal_max",
    "split_atom",
    "terminal_tensor",
    "validate_coupling",
    "validate_sequence",
    "verify_subhedge",
]

__version__ = "0.1.0"
