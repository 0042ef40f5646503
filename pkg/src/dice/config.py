"""Pipeline configuration: one JSON document, fail-closed on unknown keys."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .aec import AecParams
from .edit import EraseParams
from .errors import FormatError, ValidationError

_TOP_KEYS = {
    "lambda", "epsilon_rel", "r_style", "r_content", "gamma_q", "aec",
    "extraction_interval", "style_layer_tag", "content_layer_tag",
    "pooling_mode",
}
_AEC_KEYS = {"w_q", "w_k", "w_v", "k_steepness", "tau", "alpha_min", "alpha_max"}


@dataclass
class PipelineConfig:
    lam: float = 1.0
    epsilon_rel: float = 1e-4
    r_style: int = 18
    r_content: int = 18
    gamma_q: float = 0.25
    aec: AecParams = field(default_factory=AecParams)
    extraction_interval: tuple[int, int] = (100, 400)
    style_layer_tag: str = "down0"
    content_layer_tag: str = "up3"
    pooling_mode: str = "pool"

    def __post_init__(self):
        lo, hi = self.extraction_interval
        if lo < 0 or hi < lo:
            raise ValidationError(
                f"extraction_interval must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
            )
        if self.pooling_mode not in ("pool", "per-step"):
            raise ValidationError(
                f"pooling_mode must be pool|per-step, got {self.pooling_mode!r}"
            )
        # range checks owned by EraseParams; construct one to run them
        self.to_erase_params()

    def to_erase_params(self) -> EraseParams:
        return EraseParams(
            lam=self.lam,
            epsilon_rel=self.epsilon_rel,
            r_style=self.r_style,
            r_content=self.r_content,
            gamma_q=self.gamma_q,
            aec=self.aec,
        )

    def check_rank_against_dim(self, d: int) -> None:
        if self.r_style > d or self.r_content > d:
            raise ValidationError(
                f"configured ranks ({self.r_style}, {self.r_content}) exceed "
                f"feature dim {d}"
            )


def config_from_dict(obj: dict) -> PipelineConfig:
    if not isinstance(obj, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    if "lambda" in obj:
        kwargs["lam"] = float(obj["lambda"])
    for key in ("epsilon_rel", "gamma_q"):
        if key in obj:
            kwargs[key] = float(obj[key])
    for key in ("r_style", "r_content"):
        if key in obj:
            v = obj[key]
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"{key} must be an integer, got {v!r}")
            kwargs[key] = v
    if "extraction_interval" in obj:
        iv = obj["extraction_interval"]
        if (not isinstance(iv, (list, tuple)) or len(iv) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in iv)):
            raise ValidationError("extraction_interval must be [lo, hi] integers")
        kwargs["extraction_interval"] = (iv[0], iv[1])
    for key in ("style_layer_tag", "content_layer_tag", "pooling_mode"):
        if key in obj:
            if not isinstance(obj[key], str):
                raise ValidationError(f"{key} must be a string")
            kwargs[key] = obj[key]
    if "aec" in obj:
        sub = obj["aec"]
        if not isinstance(sub, dict):
            raise ValidationError("aec must be a JSON object")
        unknown = set(sub) - _AEC_KEYS
        if unknown:
            raise ValidationError(f"unknown aec keys: {sorted(unknown)}")
        kwargs["aec"] = AecParams(**{k: float(v) for k, v in sub.items()})
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise FormatError(f"{path}: cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: bad JSON: {e}") from e
    return config_from_dict(obj)
