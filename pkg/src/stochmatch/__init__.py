"""Maximum-cardinality matching in stochastic arrival-departure graphs."""

from .errors import CapExceededError, ModelError, PolicyError, ScenarioError
from .estimators import (
    Estimate,
    EstimatorConfig,
    estimate_opt,
    estimate_opt_given_edge,
    estimate_opt_given_empty,
    exact_opt,
    exact_opt_given_edge,
    exact_opt_given_empty,
)
from .exact_dp import chi_star, rho_metric, stochasticity_ratio, transition_probability
from .generators import make_sn_family, pendant_triangle_model, random_model
from .matching import StaticGraph, brute_force_max_matching, greedy_maximal_matching, max_matching
from .model import (
    StochasticModel,
    VertexSpec,
    conditioned_submodel,
    edge_presence_probability,
    validate_model,
)
from .policies import evaluate_policy_exact, evaluate_policy_mc, make_policy, run_adaptive
from .sampling import (
    Instantiation,
    enumerate_instantiations,
    instantiation_graph,
    realization_of,
    sample_instantiation,
)
from .scenario import parse_scenario, serialize_scenario

__version__ = "0.1.0"
