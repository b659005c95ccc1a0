"""Joint rate control and NOMA power allocation under peak and average power budgets."""

from .channel import ChannelRealization, Topology, dbm_to_watts, sample_gains, sort_users
from .dppa import EffectiveWeights, dppa_solve, objective_value
from .phy import PhyConfig, PowerAllocation, noma_rates, oma_rates
from .rate_control import LogUtility, optimal_rate

__all__ = [
    "ChannelRealization",
    "EffectiveWeights",
    "LogUtility",
    "PhyConfig",
    "PowerAllocation",
    "Topology",
    "dbm_to_watts",
    "dppa_solve",
    "noma_rates",
    "objective_value",
    "oma_rates",
    "optimal_rate",
    "sample_gains",
    "sort_users",
]
