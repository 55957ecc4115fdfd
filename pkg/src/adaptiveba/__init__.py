"""Deterministic simulator for adaptive synchronous Byzantine agreement.

Byzantine broadcast, weak BA and binary strong BA for ``n = 2t+1`` with
word complexity ``O(n(f+1))``, a quadratic fallback, an adversary library,
safety checks and word accounting.
"""

from .adversary import STRATEGIES, Strategy, forge_attempts, make_strategy, strategy_catalog
from .runner import run, run_config
from .simnet import ConfigError, NonTermination, RunConfig, RunTrace

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "NonTermination", "RunConfig", "RunTrace", "STRATEGIES", "Strategy",
    "forge_attempts", "make_strategy", "run", "run_config", "strategy_catalog",
]
