"""Model hyper-parameters and their flat ``key=value`` file format."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..errors import ContractError, ParseError
from ..geometry import LossSpace


class InjectionVariant(enum.Enum):
    MLP = "mlp"
    LINEAR = "linear"
    CONSTANT = "constant"
    NONE = "none"
    FROM_LAYER_L = "from_layer_l"


# token dropout per training resolution (short side, pixels)
TOKEN_DROPOUT_BY_RESOLUTION = {224: 0.05, 512: 0.15}


def dropout_for_resolution(resolution: int) -> float:
    try:
        return TOKEN_DROPOUT_BY_RESOLUTION[resolution]
    except KeyError:
        raise ContractError(f"no reference dropout for resolution {resolution}") from None


@dataclass
class ModelConfig:
    patch_size: int = 16
    embed_dim_enc: int = 64
    embed_dim_dec: int = 64
    enc_depth: int = 2
    depth_L: int = 4
    heads: int = 4
    mlp_ratio: int = 4
    injection_variant: InjectionVariant = InjectionVariant.MLP
    injection_hidden_mult: int = 4
    loss_space: LossSpace = LossSpace.LOG
    dropout_p: float = 0.0
    rope_base: float = 100.0
    head_type: str = "linear"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.injection_variant, str):
            self.injection_variant = InjectionVariant(self.injection_variant.lower())
        if isinstance(self.loss_space, str):
            self.loss_space = LossSpace(self.loss_space.lower())
        self.validate()

    def validate(self) -> None:
        for name in ("patch_size", "embed_dim_enc", "embed_dim_dec", "heads", "mlp_ratio", "injection_hidden_mult"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        if self.embed_dim_enc % self.heads or self.embed_dim_dec % self.heads:
            raise ContractError("embedding dims must be divisible by the head count")
        if (self.embed_dim_dec // self.heads) % 4 or (self.embed_dim_enc // self.heads) % 4:
            raise ContractError("head dim must be divisible by 4 for the 2D rotary embedding")
        if self.depth_L < 2:
            raise ContractError("decoder depth must be at least 2")
        if self.enc_depth < 0:
            raise ContractError("encoder depth must be non-negative")
        if not 0 <= self.dropout_p < 1:
            raise ContractError("dropout_p must be in [0, 1)")
        if self.head_type != "linear":
            raise ContractError("only the linear head is supported")

    @classmethod
    def from_file(cls, path) -> "ModelConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        values: dict = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", line=lineno, path=path)
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise ParseError(f"unknown config key {key!r}", line=lineno, path=path)
            default = getattr(cls(), key)
            try:
                if isinstance(default, enum.Enum) or isinstance(default, str):
                    values[key] = raw
                elif isinstance(default, int):
                    values[key] = int(raw)
                else:
                    values[key] = float(raw)
            except ValueError as exc:
                raise ParseError(f"bad value for {key}: {raw!r}", line=lineno, path=path) from exc
        try:
            return cls(**values)
        except (ValueError, ContractError) as exc:
            raise ParseError(str(exc), path=path) from exc

    def to_file(self, path) -> None:
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, enum.Enum):
                value = value.value
            lines.append(f"{key} = {value}")
        Path(path).write_text("\n".join(lines) + "\n")
