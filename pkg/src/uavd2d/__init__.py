"""Analytic performance model and resource allocation for UAV-relayed D2D
underlay cellular networks, with Monte-Carlo and exhaustive-search oracles."""

from .channel import FadingSpec, LinkStats
from .outage import OutagePair, outage
from .metrics import FblParams, avg_decoding_error, build_piecewise, ergodic_capacity
from .power import PairProblem, PowerBounds, PowerPair, optimal_power_pair
from .scenario import NetworkRealization, ScenarioConfig, generate
from .allocation import (MatchingState, WeightTable, allocate_direct, allocate_exhaustive,
                         allocate_greedy, allocate_with_relays, hungarian_max, total_power)

__version__ = "0.1.0"
