"""MAP and minimum-energy state path estimation for SDE models."""

from ._core import (
    MERIT_KINDS,
    Problem,
    benes_exact_log_transition,
    benes_problem,
    builtin_problem,
    custom_problem,
    evaluate_merit,
    gradient_suite,
    initial_path,
    ou_oracle_problem,
    rts_smoother,
    run_benes_convergence,
    run_validate,
    run_vdp_robust,
    simulate,
    solve,
    student_t_loglik,
    uniform_grid,
)

__all__ = [
    "MERIT_KINDS",
    "Problem",
    "benes_exact_log_transition",
    "benes_problem",
    "builtin_problem",
    "custom_problem",
    "evaluate_merit",
    "gradient_suite",
    "initial_path",
    "ou_oracle_problem",
    "rts_smoother",
    "run_benes_convergence",
    "run_validate",
    "run_vdp_robust",
    "simulate",
    "solve",
    "student_t_loglik",
    "uniform_grid",
]
