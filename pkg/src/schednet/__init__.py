"""Randomized CSMA-style scheduling for wireless and circuit-switched networks."""

from .analysis import (
    chi2_distance,
    drift_report,
    empirical_distribution,
    expm_perturbation_check,
    free_energy,
    gibbs_from_potential,
    lyapunov_circuit,
    lyapunov_wireless,
    timescale_report,
    tv_distance,
    verify_goodpi,
)
from .capacity import CapacityQuery, LoadResult, load_factor, scale_to_load
from .chains import (
    conductance,
    glauber_kernel,
    glauber_stationary,
    lossnet_kernel,
    lossnet_stationary,
    matrix_norm,
    mixing_bound_glauber,
    mixing_bound_lossnet,
    scheduling_chain,
    stationary_from_kernel,
)
from .model import CircuitNetwork, InterferenceGraph, NetworkState, schedule_space, validate_state
from .sim import SimConfig, Trace, mw_f_schedule, mw_schedule, simulate
from .weights import LOGLOG, WeightMode, node_weights, validate_weight_function

__version__ = "0.1.0"
