"""slln_lab: desk-scale verification of strong-law convergence for
products of random operator semigroups."""

from .spaces import (SpaceModel, PositiveForm, OperatorNorm, euclidean_model, sequence_model,
                     schatten_model, max_norm_model, vector_norm, dual_norm, pairing,
                     operator_norm, p_smooth_check, p_smooth_gap, seminorm_i, rank_one_form,
                     truncation_form, norm_budget_bound)
from .ensembles import (DiscreteOperatorDistribution, GeneratorEnsemble, SamplePath,
                        expectation, build_symmetric_ensemble, sample_iid, path_from_indices,
                        check_independence_product, check_expectation_action,
                        check_adjoint_expectation, check_random_element_action)
from .semigroups import (TimeGrid, expm, product_composition, expected_semigroup,
                         chernoff_iterate, limit_semigroup, chernoff_conditions_check)
from .decomposition import (SubsetIndex, DecompositionTerm, delta, term_F,
                            expansion_identity_check, mu, increment_d, increment_profile,
                            martingale_property_check, mean_matched_martingale_probe,
                            bound_est_norm, bound_increment)
from .fourth_moment import (fourth_moment_formula, fourth_moment_bruteforce,
                            covering_tuple_counts, tail_coefficient_probe)
from .experiments import (ExperimentConfig, sot_error, wot_error, form_error,
                          path_convergence_study, tail_scan, fit_tail_slope, burkholder_ratio,
                          run_error_trials)
from .records import TrialRecord, config_hash, wilson_interval, persist_results
from .suite import SuiteCase, standard_suite, suite_case
from .config import validate_config, load_config
from .errors import CapabilityError, ConfigError, FormInvariantError

__version__ = "0.1.0"
