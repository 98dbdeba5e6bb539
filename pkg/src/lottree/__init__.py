"""Budget-consistent incentive trees: Pachira lotteries, reward mechanisms,
prospect-theory valuation, property oracles and a recruitment simulator."""

from .tree import LotTree, TreeError, DegenerateTreeError, aggregate, add_node, mutate_contribution, dumps, loads
from .lottery import (
    PiParams,
    LotteryProfile,
    NoRescaling,
    FirstIsRoot,
    TimeDependent,
    StructureDependent,
    pi,
    lottery_values,
    rescale,
    rescaled_lottery_values,
    sybil_merge_value,
)
from .mechanisms import MechanismSpec, RewardProfile, expected_reward, select_winners, inclusion_probability

__version__ = "0.1.0"
