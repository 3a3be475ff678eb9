"""Intrinsic fear: DQN with a learned catastrophe classifier, plus exact tabular bound checks."""
from .agent import AgentConfig, TrainMetrics, train
from .envs import AdventureSeeker, CartPole, make_env
from .fear import FearModel, fear_score

__version__ = "0.1.0"
__all__ = ["AdventureSeeker", "AgentConfig", "CartPole", "FearModel", "TrainMetrics",
           "fear_score", "make_env", "train"]
