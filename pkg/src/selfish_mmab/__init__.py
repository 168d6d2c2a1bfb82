"""Decentralized multiplayer bandits with selfish-robust algorithms."""
from .adversary import ADVERSARIES
from .algo_rsdgt import RsdGT, rsd_attribution
from .algo_sicgt import SicGT
from .algo_statistic import SelfishRobustMMAB
from .env import ConfigError, EnvModel, Environment, ProtocolViolation, Sensing
from .harness import RunConfig, run_batch
from .metrics import pseudo_regret, rsd_regret, rsd_welfare
from .sim import Phase, RunResult, simulate

__all__ = [
    "ADVERSARIES", "ConfigError", "EnvModel", "Environment", "Phase", "ProtocolViolation",
    "RsdGT", "RunConfig", "RunResult", "SelfishRobustMMAB", "Sensing", "SicGT",
    "pseudo_regret", "rsd_attribution", "rsd_regret", "rsd_welfare", "run_batch", "simulate",
]
