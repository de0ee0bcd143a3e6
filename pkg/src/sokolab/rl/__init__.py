from .evaluate import evaluate, run_policy_episode
from .loss import LossConfig, impala_loss
from .rollout import TrajectoryBatch, VectorRunner
from .train import DESK_PROFILE, TrainConfig, learner_step, learning_rate, train
from .vtrace import VTraceConfig, vtrace

__all__ = [
    "evaluate", "run_policy_episode",
    "LossConfig", "impala_loss",
    "TrajectoryBatch", "VectorRunner",
    "DESK_PROFILE", "TrainConfig", "learner_step", "learning_rate", "train",
    "VTraceConfig", "vtrace",
]
