"""tamelab: a numerical laboratory for discrete Dirichlet spaces.

Builds weighted-grid approximations of Euclidean domains, computes heat and
Feynman-Kac semigroups for signed measures with bulk and boundary parts, and
verifies gradient / Bochner / Poincaré / log-Sobolev inequalities nodewise,
with an independent random-walk oracle.
"""

__version__ = "0.1.0"

from .errors import (ConfigParse, DisconnectedDomain, EmptyDomain, IterationDivergence,
                     NegativeTime, NoBoundary, NonPositiveTestFunction, NonPositiveWeight,
                     RhoOutOfRange, SingularSystem, SolverDivergence, StepTooLarge,
                     TamelabError, UnknownScenario)
from .grid import GridDomain, build_grid, domain_from_config, write_pgm
from .generator import (GeneratorContext, build_generator, energy, energy_perturbed,
                        gamma, graph_context, inner, two_node_context, validate_function)
from .semigroup import (conservativeness_defect, heat_apply, lambda0, resolvent_apply)
from .perturbation import (TamingMeasure, boundary_measure, bulk_measure, combine,
                           moderateness_constant, moderateness_sweep, node_potential,
                           taming_apply, trotter_apply, zero_measure)
from .kato import (alpha_potential_sup, kato_profile, khasminskii_bound,
                   surface_lp_check)
from .reports import InequalityReport
from .verifier import (check_be2, check_gamma_gamma, check_ge, check_holder,
                       check_jensen, check_logsobolev, check_poincare,
                       check_power_domination, check_selfimprovement, make_battery,
                       make_positive_battery)
from .doubling import DoubledDomain, build_doubled, doubled_identity_check, sub_taming_check
from .montecarlo import (WalkEstimate, WalkerConfig, mc_feynman_kac, mc_moderateness,
                         mc_vs_matrix)
from .scenarios import SCENARIOS, ScenarioSpec, make_scenario, run_scenario
