"""Correlation decay, contraction certificates, and sampling diagnostics for
list colorings and the antiferromagnetic Potts model on trees and
bounded-degree large-girth graphs."""

from .graphs import (
    ColoringInstance,
    Graph,
    Pinning,
    PottsInstance,
    RootedTree,
    ball,
    check_pinning_feasible,
    complete_graph,
    cycle_graph,
    dary_tree,
    generate_girth_graph,
    girth,
    make_rng,
    parse_graph_spec,
    path_graph,
    random_tree,
    sphere,
)
from .tree import (
    MarginalTable,
    SubDistribution,
    bound_lower,
    bound_one_level,
    bound_potts_two_level,
    bound_two_level_odds,
    exact_tree_marginals,
    potts_wsm_cap,
    recursion_step_coloring,
    recursion_step_potts,
    subtree_marginals,
    verify_marginal_caps,
    xi,
)
from .jacobian import (
    ContractionReport,
    JacobianBlocks,
    Potential,
    WeightScheme,
    amortized_bound,
    certify_contraction,
    f_entropy,
    jacobian_phi,
    jacobian_plain,
    l2_bound_formula,
    l2_norm_sq,
    norm_star_star,
    norm_weighted,
    phi_eval,
    potential_coloring,
    potential_potts,
    power_iteration,
    s_entropy,
    tech1_bound,
    weight_scheme_coloring,
    weight_scheme_potts,
)
from .oracle import (
    GibbsTable,
    InfluenceMatrix,
    check_sum_infl_inequality,
    enumerate_gibbs,
    influence_decay_at_R,
    influence_matrix,
    spectral_independence,
    tv_distance,
    w1_hamming,
)
from .glauber import (
    ChainState,
    MixingReport,
    coalescence_estimate,
    exact_mixing_time,
    glauber_step,
    make_chain,
    run_chain,
    stationarity_gap,
    transition_matrix,
    tv_decay_report,
)
from .coupling import (
    CouplingOutcome,
    algorithm1_couple,
    d_closed_bound,
    d_recursion,
    parameter_search,
    run_coupling_trials,
)
from .decay import (
    ConstantsReport,
    DecayProfile,
    coloring_regime_constants,
    constants_report,
    fit_rate,
    potts_regime_constants,
    ssm_profile,
    tid_profile,
    wsm_profile_potts,
)

__version__ = "0.1.0"
