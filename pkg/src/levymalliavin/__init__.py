"""Pathwise derivative calculus for Levy processes.

Simulation of Levy paths, integrals against the driving random measure,
multiple integrals over finite-mass jump sets, a family of localized
jump-time derivative operators with a Monte Carlo duality verifier, and
absolute-continuity experiments for three classes of jump SDEs.
"""

__version__ = "0.1.0"

from .measures import (DensityMeasure, DiscreteMeasure, Interval, SizeSet,
                       TruncatableMeasure, ZERO_MEASURE)
from .paths import (JumpRecord, LevyPath, LevyTriplet, count_jumps,
                    evaluate_X, path_from_json, path_from_record,
                    path_to_json, path_to_record, restrict_jumps,
                    simulate_path)
from .batch import PathBatch, iter_batches, simulate_batch
from .kernels import Kernel, TimeFunction, WeightK, validate_kernel, validate_weight
from .random_measure import (compensator_M, compensator_N, fubini_residual,
                             integrate_M, integrate_M_batch, integrate_N,
                             integrate_N_batch, integrate_tildeN,
                             mu_inner_product)
from .chaos import (SimplexIntegrand, moment_bound_check, moment_constant,
                    multiple_integral, multiple_integral_batch,
                    product_identity_residual, simplex_lp_integral,
                    star_contract, symmetrize, tensor_tilde)
from .malliavin import (DerivativeProcess, SmoothFunctional,
                        abs_continuity_indicator, derivative_Jn,
                        derivative_M, derivative_M_alt,
                        derivative_jump_functional, derivative_smooth,
                        finite_difference_check, l2_norm_sq,
                        orthogonality_residual, step_basis, step_l2_cross)
from .mc import MCConfig, StreamStats, run_streaming
from .duality import duality_pair, duality_residual, product_duality_residual
from .sde import (AdditiveJumpSDE, DiffusionSDE, Flow, JumpFlowTrajectory,
                  MultiplicativeJumpSDE, derivative_additive,
                  derivative_diffusion_D0, derivative_multiplicative,
                  last_jump_weight, local_monotone_weight, monotone_weight,
                  solve_additive_jump, solve_diffusion, solve_multiplicative,
                  stopping_time_S, wronskian_condition)
