"""Python access to the jys core: exact reverse oracles, KLUB schedule search, samplers."""

from ._jys import (
    DomainError,
    JysError,
    NumericalError,
    Oracle,
    beta,
    countdown_generate,
    derive_seed,
    golden_section_maximize,
    jump_your_steps,
    kl_divergence,
    klub_refinement,
    sample,
    schedule_kl,
    sigma,
    transition_kernel,
    uniform_schedule,
    verify,
    violation_rate,
)

__all__ = [
    "DomainError",
    "JysError",
    "NumericalError",
    "Oracle",
    "beta",
    "countdown_generate",
    "derive_seed",
    "golden_section_maximize",
    "jump_your_steps",
    "kl_divergence",
    "klub_refinement",
    "sample",
    "schedule_kl",
    "sigma",
    "transition_kernel",
    "uniform_schedule",
    "verify",
    "violation_rate",
]
