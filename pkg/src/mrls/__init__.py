"""Multi-layered recursive least squares estimation for rapidly
time-varying system identification: estimators, a Markov channel
simulator, closed-form performance predictors, and a Monte Carlo
experiment harness with a CLI front end.
"""

from .numerics import (
    NumericalBreakdownError,
    herm_dot,
    rank1_gain_update,
    make_rng,
    bpsk_stream,
    cgauss_stream,
)
from .channel import (
    ChannelSpec,
    ChannelState,
    default_pdp,
    load_pdp,
    regressor_matrix,
    desired_signal,
)
from .estimators import FilterParams, Rls, MRls, pi_update, layer_select
from .theory import (
    DerivedConstants,
    rls_mse,
    acf_propagate,
    coherence_from_acf,
    coherence_recursion,
    coherence_chain,
    mrls_mse_predict,
    posteriori_power_offset,
    theta_contraction_oracle,
    noise_term_power,
    noise_vector_power_mc,
    q_diagonal,
    q_diagonal_product,
    complexity_counts,
)
from .harness import (
    RunConfig,
    MetricsSeries,
    standard_config,
    run_tracking,
    sweep_snr,
    run_impulse,
    run_uncertainty,
    measure_layer_acf,
    emit_outputs,
    series_summary,
    config_to_dict,
    config_from_dict,
    snr_db_to_noise_variance,
    db,
)

__version__ = "0.1.0"
