"""Poisoned-image construction by tail-triplet splicing.

Each plane of the clean image keeps its leading singular triplets and
takes its last ``k`` triplets from the matching plane of a fixed trigger
image. The RGB variant splices all colour planes; the UV variant works on
the two chroma planes of YUV and leaves luma alone.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .colorspace import ImageTensor, quantize, rgb_to_yuv, yuv_to_rgb
from .errors import InvalidInput, KTooLarge
from .svd_core import decompose, reconstruct, splice_tail

Variant = Literal["RGB", "UV"]

# (image side, k for RGB, k for UV) per dataset
DATASET_DEFAULT_K: dict[str, tuple[int, int, int]] = {
    "cifar10": (32, 16, 26),
    "gtsrb": (64, 33, 41),
    "tiny-imagenet": (64, 33, 52),
    "imagenet": (224, 163, 207),
}
DEFAULT_POISON_RATE = 0.1


def default_k(variant: Variant, height: int, width: int, dataset: str | None = None) -> int:
    """Recommended ``k`` for a dataset, or for an image size when unambiguous."""
    col = 1 if variant == "RGB" else 2
    if dataset is not None:
        try:
            return DATASET_DEFAULT_K[dataset.lower()][col]
        except KeyError:
            raise InvalidInput(f"no default k for dataset {dataset!r}") from None
    side = min(height, width)
    candidates = {row[col] for row in DATASET_DEFAULT_K.values() if row[0] == side}
    if len(candidates) != 1:
        raise InvalidInput(
            f"no unambiguous default k for {height}x{width} ({variant}); pass k or dataset"
        )
    return candidates.pop()


@dataclass(frozen=True)
class PoisonConfig:
    variant: Variant = "RGB"
    k: int = 16
    target_label: int = 0
    poison_rate: float = DEFAULT_POISON_RATE
    seed: int = 0
    trigger_source: str = ""

    def __post_init__(self):
        if self.variant not in ("RGB", "UV"):
            raise InvalidInput(f"variant must be RGB or UV, got {self.variant!r}")
        if int(self.k) != self.k or self.k < 0:
            raise InvalidInput(f"k must be a non-negative integer, got {self.k}")
        if not 0.0 <= self.poison_rate <= 1.0:
            raise InvalidInput(f"poison_rate must lie in [0, 1], got {self.poison_rate}")
        if self.target_label < 0:
            raise InvalidInput("target_label must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise InvalidInput("seed must be an unsigned 64-bit integer")

    def canonical_bytes(self) -> bytes:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":")).encode()

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PoisonConfig":
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def _bilinear_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) triangle-filter weights on pixel centres.

    The filter radius grows with the shrink factor, so downscaling averages
    over the source instead of point-sampling it (same convention as the
    common image libraries). For upscaling this is plain bilinear with
    edge clamping.
    """
    scale = n_in / n_out
    support = max(scale, 1.0)
    centres = (np.arange(n_out) + 0.5) * scale
    src = np.arange(n_in) + 0.5
    w = np.maximum(0.0, 1.0 - np.abs(src[None, :] - centres[:, None]) / support)
    return w / w.sum(axis=1, keepdims=True)


def prepare_trigger(trigger: ImageTensor, target_h: int, target_w: int) -> ImageTensor:
    """Resample a 3-channel trigger to the target size (bilinear)."""
    if target_h < 1 or target_w < 1:
        raise InvalidInput(f"target size {target_h}x{target_w} has zero area")
    if trigger.channels != 3:
        raise InvalidInput("trigger image must have 3 channels")
    if (trigger.height, trigger.width) == (target_h, target_w):
        return trigger
    wy = _bilinear_weights(trigger.height, target_h)
    wx = _bilinear_weights(trigger.width, target_w)
    planes = np.einsum("oh,chw,pw->cop", wy, trigger.planes, wx)
    return ImageTensor(np.clip(planes, 0.0, 1.0), trigger.space)


def trigger_digest(trigger: ImageTensor) -> str:
    h = hashlib.sha256()
    h.update(f"{trigger.space}:{trigger.channels}x{trigger.height}x{trigger.width}:".encode())
    h.update(np.ascontiguousarray(trigger.planes, dtype="<f8").tobytes())
    return h.hexdigest()


def splice_planes(clean: np.ndarray, trigger: np.ndarray, k: int) -> np.ndarray:
    """Per-plane splice of (C, H, W) stacks, returned unclamped."""
    if clean.shape != trigger.shape:
        raise InvalidInput(f"plane stacks differ: {clean.shape} vs {trigger.shape}")
    r = min(clean.shape[1:])
    if k > r:
        raise KTooLarge(f"k={k} exceeds min(height, width)={r}")
    return np.stack(
        [reconstruct(splice_tail(decompose(c), decompose(t), k)) for c, t in zip(clean, trigger)]
    )


def _check_k(cfg: PoisonConfig, img: ImageTensor) -> None:
    r = min(img.height, img.width)
    if cfg.k > r:
        raise KTooLarge(f"k={cfg.k} exceeds min(height, width)={r}")


def embed_rgb(
    clean: ImageTensor, trigger: ImageTensor, cfg: PoisonConfig, *, quantize_output: bool = True
) -> ImageTensor:
    """Splice every plane of ``clean``; GRAY inputs use the trigger's luma."""
    if cfg.variant != "RGB":
        raise InvalidInput("embed_rgb needs a config with variant RGB")
    if clean.space not in ("RGB", "GRAY"):
        raise InvalidInput(f"embed_rgb takes RGB or GRAY images, got {clean.space}")
    _check_k(cfg, clean)
    trig = prepare_trigger(trigger, clean.height, clean.width)
    trig_planes = trig.planes if clean.space == "RGB" else rgb_to_yuv(trig).planes[:1]
    out = ImageTensor(splice_planes(clean.planes, trig_planes, cfg.k), clean.space)
    return quantize(out) if quantize_output else out


def embed_uv(
    clean: ImageTensor, trigger: ImageTensor, cfg: PoisonConfig, *, quantize_output: bool = True
) -> ImageTensor:
    """Splice the U and V planes only, keeping the clean luma."""
    if cfg.variant != "UV":
        raise InvalidInput("embed_uv needs a config with variant UV")
    if clean.space != "RGB":
        raise InvalidInput(f"embed_uv takes RGB images, got {clean.space}")
    _check_k(cfg, clean)
    trig = prepare_trigger(trigger, clean.height, clean.width)
    c_yuv = rgb_to_yuv(clean).planes
    t_yuv = rgb_to_yuv(trig).planes
    chroma = splice_planes(c_yuv[1:], t_yuv[1:], cfg.k)
    out = yuv_to_rgb(ImageTensor(np.concatenate([c_yuv[:1], chroma]), "YUV"))
    return quantize(out) if quantize_output else out


def embed(
    clean: ImageTensor, trigger: ImageTensor, cfg: PoisonConfig, *, quantize_output: bool = True
) -> ImageTensor:
    fn = embed_rgb if cfg.variant == "RGB" else embed_uv
    return fn(clean, trigger, cfg, quantize_output=quantize_output)


def residual(clean: ImageTensor, poisoned: ImageTensor) -> ImageTensor:
    """|clean - poisoned| scaled so its maximum is 1 (all-zero stays zero)."""
    if clean.shape != poisoned.shape or clean.space != poisoned.space:
        raise InvalidInput(
            f"cannot diff {clean.space}{clean.shape} against {poisoned.space}{poisoned.shape}"
        )
    diff = np.abs(clean.planes - poisoned.planes)
    peak = diff.max()
    if peak > 0:
        diff = diff / peak
    return ImageTensor(diff, clean.space)
