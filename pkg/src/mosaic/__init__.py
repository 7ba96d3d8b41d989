"""Deterministic multi-layer network simulator for games-in-games mosaic control."""
from .games import MatrixGame, MixedStrategy, check_gne, compose, solve_zero_sum
from .scenario import ScenarioConfig, load_scenario
from .sim import run, summarize
from .spectral import Agent, LayeredNetwork, Status, algebraic_connectivity, build_weights, laplacian
from .tactical import gne_iterate

__version__ = "0.1.0"
