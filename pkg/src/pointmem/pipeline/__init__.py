from .offline import Reconstruction, offline_reconstruct, order_greedy, pooled_similarity, select_keyframes_fps
from .online import FrameResult, VORun, online_update, render_results, run_vo, run_vo_full
from .predictors import ModelPredictor, OracleConfig, OraclePredictor, Pending, RunningMemory, oracle_predict
from .synthetic import SceneParams, SyntheticScene, look_at, synth_scene
from .train import N_VIEWS, ToyTrainer, TrainConfig, TrainHistory, prediction_loss, toy_scenes, toy_train

__all__ = [
    "FrameResult",
    "ModelPredictor",
    "N_VIEWS",
    "OracleConfig",
    "OraclePredictor",
    "Pending",
    "Reconstruction",
    "RunningMemory",
    "SceneParams",
    "SyntheticScene",
    "ToyTrainer",
    "TrainConfig",
    "TrainHistory",
    "VORun",
    "look_at",
    "offline_reconstruct",
    "online_update",
    "oracle_predict",
    "order_greedy",
    "pooled_similarity",
    "prediction_loss",
    "render_results",
    "run_vo",
    "run_vo_full",
    "select_keyframes_fps",
    "synth_scene",
    "toy_scenes",
    "toy_train",
]
