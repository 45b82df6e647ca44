"""Numerical checks for finite-dimensional quantum Markov semigroups with
detailed balance: entropy decay constants, their stability under a change
of the invariant state, channel contraction coefficients, and the state
preparation and Gibbs-ladder pipelines built on them."""

__version__ = "0.1.0"

from .errors import (ConfigError, DBCError, DegenerateSampling,
                     DegeneracyError, DomainViolation, EvolutionError,
                     HermitianViolation, HypothesisError, IncompatibleStates,
                     IrreducibilityError, ModelError, NotModularEigenvector,
                     PrimitivityError, QmsLabError, RankError, ShapeError,
                     SubalgebraError, SupportError, UnitarityError)
from .operator_core import (FullRankState, Superoperator, dag,
                            lindblad_relative_entropy, partial_trace,
                            relative_entropy, tensor, unvec, vec)
from .lindblad import (JumpOperatorSet, LindbladModel, check_detailed_balance,
                       complete_matrix_unit_generator, depolarizing_generator,
                       evolve, extract_bohr_frequencies, stabilizing_generator)
from .entropy import (decay_trace, default_time_grid, doi_apply,
                      entropy_production_direct, entropy_production_fisher,
                      estimate_clsi_witness, estimate_mlsi, extend_model)
from .holley_stroock import (PerturbationFactor, check_entropy_comparison,
                             check_ep_comparison, check_hs_transfer,
                             check_lsi_perturbation, hs_factor_nonprimitive,
                             hs_factor_primitive, model_is_primitive)
from .sdpi import (KrausChannel, alpha2_unital, build_unital_counterpart,
                   channel_from_model, check_sdpi_bound, check_sdpi_corollary,
                   depolarizing_channel, estimate_sdpi)
from .stateprep import (GraphSpec, build_graph_generator, build_history_model,
                        graph_heat_partner, graph_hs_bound, run_preparation,
                        run_stopping_time)
from .thermal import (GibbsSpec, effective_low_energy_model,
                      flagged_evolution, ladder_model, t1_relaxation_check,
                      thermal_hs_factor, truncated_gibbs, truncated_spec)
from .reporting import (ConstantEstimate, InequalityReport, canonical_json,
                        decode_complex_matrix, encode_complex_matrix,
                        make_report, model_hash, summarize_reports, write_csv,
                        write_json)
