"""Numerical toolkit for nonlocal maximum principles.

Lévy measures and their constants, nonlocal operators and nonlinearities,
barrier verification, support-translation reachability, a monotone explicit
scheme and empirical diagnostics, driven by the ``nmpl`` command.
"""
from .errors import (ConfigError, DegenerateFitError, DivergenceError, EmptyConeWarning,
                     InstabilityError, NmplError, PreconditionError, TailUnintegrableError,
                     UnboundedCoefficientError, UndefinedAtOriginError, UnsupportedKindError)
from .quadrature import AngularMeasure, QuadratureConfig, QuadResult, integrate
from .measures import (AxisCharging, BoundReport, ConeRestricted, ConeSpec, HalfSpaceStable,
                       JumpMap, PushForward, RadialStable, ZeroOrderDirectional,
                       cone_weighted_mass, density_at, mc_scaling_probe, measure_at,
                       measure_bound)
from .fields import GridField, SmoothFunction
from .operators import (FORMS, NonlinearitySpec, NonlocalConfig, PucciParams, SplitValue,
                        directional_operator, ellipticity_probe, eval_compensated, eval_F,
                        eval_levy_ito, eval_zero_order, pucci_minus, pucci_plus)
from .barriers import (HorizontalBarrier, VerticalBarrier, barrier_eval, default_c, delta_bar,
                       gamma0, horizontal_barrier_eval, strict_supersolution_margin,
                       verify_component_lemmas, verify_exp_inequality,
                       verify_exp_inequality_scalar, verify_nl_estimate,
                       vertical_barrier_eval)
from .reachability import BoxGrid, covers_domain, iterate_reachable, support_mask
from .scheme import (SchemeConfig, Trajectory, discrete_comparison_check, discrete_F,
                     simulate, stability_dt, step)
from .diagnostics import (n_expression, nondegeneracy_probe, propagation_test, scaling_check,
                          vertical_nondegeneracy_check)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateFitError",
    "DivergenceError",
    "EmptyConeWarning",
    "InstabilityError",
    "NmplError",
    "PreconditionError",
    "TailUnintegrableError",
    "UnboundedCoefficientError",
    "UndefinedAtOriginError",
    "UnsupportedKindError",
    "AngularMeasure",
    "QuadratureConfig",
    "QuadResult",
    "integrate",
    "AxisCharging",
    "BoundReport",
    "ConeRestricted",
    "ConeSpec",
    "HalfSpaceStable",
    "JumpMap",
    "PushForward",
    "RadialStable",
    "ZeroOrderDirectional",
    "cone_weighted_mass",
    "density_at",
    "mc_scaling_probe",
    "measure_at",
    "measure_bound",
    "GridField",
    "SmoothFunction",
    "FORMS",
    "NonlinearitySpec",
    "NonlocalConfig",
    "PucciParams",
    "SplitValue",
    "directional_operator",
    "ellipticity_probe",
    "eval_compensated",
    "eval_F",
    "eval_levy_ito",
    "eval_zero_order",
    "pucci_minus",
    "pucci_plus",
    "HorizontalBarrier",
    "VerticalBarrier",
    "barrier_eval",
    "default_c",
    "delta_bar",
    "gamma0",
    "horizontal_barrier_eval",
    "strict_supersolution_margin",
    "verify_component_lemmas",
    "verify_exp_inequality",
    "verify_exp_inequality_scalar",
    "verify_nl_estimate",
    "vertical_barrier_eval",
    "BoxGrid",
    "covers_domain",
    "iterate_reachable",
    "support_mask",
    "SchemeConfig",
    "Trajectory",
    "discrete_comparison_check",
    "discrete_F",
    "simulate",
    "stability_dt",
    "step",
    "n_expression",
    "nondegeneracy_probe",
    "propagation_test",
    "scaling_check",
    "vertical_nondegeneracy_check",
]
