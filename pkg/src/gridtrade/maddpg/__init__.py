from .agent import (
    AgentBundle,
    act,
    critic_input,
    critic_target,
    execute_policy,
    soft_update,
    update_actor,
    update_critic,
)
from .buffer import Batch, ReplayBuffer
from .checkpoint import load_actors, save_checkpoint
from .mlp import Adam, Mlp, ShapeError, backward, forward
from .noise import OuNoise
from .train import Hyperparams, TrainingDiverged, TrainResult, train

__all__ = [
    "Adam", "AgentBundle", "Batch", "Hyperparams", "Mlp", "OuNoise", "ReplayBuffer",
    "ShapeError", "TrainResult", "TrainingDiverged", "act", "backward", "critic_input",
    "critic_target", "execute_policy", "forward", "load_actors", "save_checkpoint",
    "soft_update", "train", "update_actor", "update_critic",
]
