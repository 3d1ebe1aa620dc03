"""Sinh-accelerated inverse Z-transforms and discrete-monitoring option pricing.

The package splits into a generic inversion engine (contours, zinv), the
model layer for Levy one-step factors (levy, levelcurves, wh, payoffs),
the pricers that tie them together (pricing), brute-force verifiers
(oracles) and a command-line front end (cli).
"""

from .contours import (AnnulusSpec, ContourReport, SinhXiContour, SinhZContour,
                       build_z_contour, chi_xi_deriv, chi_xi_eval, chi_z_deriv,
                       chi_z_eval, edge_min_distance, validate_z_contour)
from .levy import (ClassificationError, EsscherShift, KoBoLParams, LevyModel,
                   MixtureParams, NTSParams, QuadraticParams,
                   asymptotic_params, esscher, make_kobol, make_mixture,
                   make_nts, make_quadratic, p_delta, phi_eval, psi_eval,
                   symmetry_check)
from .levelcurves import (CurvePair, ExtendedCurve, TraceFailure,
                          build_extended_curve, flatten_curve,
                          strip_width_estimate, trace_trajectory)
from .zinv import (NumericalFailure, SinhPlan, TransformEvaluator, TrapPlan,
                   ZInvResult, choose_sinh_params, choose_trap_params,
                   gain_factor, hardy_pole_norm, invert_sinh, invert_sinh_full,
                   invert_trapezoid, predicted_step, predicted_terms,
                   resolvent_bound, sinh_invert_mp, sinh_nodes_empirical,
                   trap_invert_mp, trap_nodes_certified, trap_nodes_empirical,
                   trapezoid_error_bound)
from .payoffs import (PayoffTransform, call_transform, custom_transform,
                      decay_constant, digital_down_transform,
                      digital_up_transform, ghat_eval, payoff_value,
                      put_transform, regularity_strip)
from .wh import (FactorizationError, WHContext, factor_identity_residual,
                 wh_continue, wh_minus, wh_plus, wh_vp_line)
from .pricing import (InnerIntegralPlan, PriceResult, PricingRequest,
                      inner_integral, price_barrier, price_european,
                      price_european_nonsymmetric, price_european_symmetric)
from .oracles import (oracle_barrier_induction, oracle_european_direct,
                      oracle_hardy_numeric, oracle_zinv_series,
                      oracle_zinv_series_log)

__version__ = "0.1.0"
