from . import ops
from .checkpoint import load_checkpoint, load_into, save_checkpoint
from .gradcheck import finite_diff_check
from .nn import LayerNorm, Linear, Mlp, Module
from .optim import SGD, Adam
from .rope import RotaryTable
from .tensor import DEFAULT_DTYPE, Parameter, Tensor, backward, is_grad_enabled, no_grad

__all__ = [
    "DEFAULT_DTYPE",
    "LayerNorm",
    "Linear",
    "Mlp",
    "Module",
    "Parameter",
    "RotaryTable",
    "Adam",
    "SGD",
    "Tensor",
    "backward",
    "finite_diff_check",
    "is_grad_enabled",
    "load_checkpoint",
    "load_into",
    "no_grad",
    "ops",
    "save_checkpoint",
]
