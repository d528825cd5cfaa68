from ..geometry import Prediction
from .config import InjectionVariant, ModelConfig, dropout_for_resolution
from .injection import FeedbackInjection
from .memory import MemoryEntry, MemoryState, TokenSeq
from .network import MultiViewNet

__all__ = [
    "FeedbackInjection",
    "InjectionVariant",
    "MemoryEntry",
    "MemoryState",
    "ModelConfig",
    "MultiViewNet",
    "Prediction",
    "TokenSeq",
    "dropout_for_resolution",
]
