from .graphs import ContactGraph, betweenness_rank, load_edge_list, synth_graph
from .rps import BiasedRpsEnv, rps_step
from .taxi import TaxiEnv
from .epidemic import EpidemicEnv, EpidemicParams, EpidemicState, epidemic_action_table

__all__ = [
    "ContactGraph",
    "betweenness_rank",
    "load_edge_list",
    "synth_graph",
    "BiasedRpsEnv",
    "rps_step",
    "TaxiEnv",
    "EpidemicEnv",
    "EpidemicParams",
    "EpidemicState",
    "epidemic_action_table",
]
