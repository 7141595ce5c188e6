from ._core import (
    ConfigError,
    ConverterParams,
    Mode,
    StabilizationFailure,
    UnstableSystemError,
    admittance_norm,
    certify,
    closed_loop_abscissa,
    droop_gains,
    hinf_norm,
    lambda_min,
    reference_pv_gains,
    design_lg_set,
    fixture_q_red,
    pll_gains,
    scenarios,
    simulate,
    synthesize,
)

__all__ = [
    "ConfigError",
    "ConverterParams",
    "Mode",
    "StabilizationFailure",
    "UnstableSystemError",
    "admittance_norm",
    "certify",
    "closed_loop_abscissa",
    "droop_gains",
    "hinf_norm",
    "lambda_min",
    "reference_pv_gains",
    "design_lg_set",
    "fixture_q_red",
    "pll_gains",
    "scenarios",
    "simulate",
    "synthesize",
]
