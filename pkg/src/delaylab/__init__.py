"""Mean application-packet delay in single-cell IEEE 802.11 DCF WLANs."""
from .appdelay import (
    AnalyticDelays,
    Scenario,
    fragment_delay,
    mean_delay,
    mean_delay_sub_mtu,
    mean_delay_super_mtu,
)
from .distributions import Deterministic, Empirical, Exponential, Uniform, normalized_moments
from .mac import MacParams, aggregate_capacity, slot_probabilities, solve_fixed_point

__version__ = "0.1.0"
