"""Dataset IO, poisoned-set construction and manifests.

Files handled here:

* CIFAR-10 binary: 3073-byte records, one label byte followed by the
  1024-byte R, G and B planes (row-major 32x32 each).
* PPM ``P6`` with maxval 255 for single images.
* Manifest JSON recording which samples were poisoned.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .colorspace import ImageTensor
from .embed import PoisonConfig, embed, prepare_trigger, trigger_digest
from .errors import FormatError, InvalidInput
from .rng import sample_indices

CIFAR_SIDE = 32
CIFAR_CLASSES = 10
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE


class PoisonRateWarning(UserWarning):
    """Poison rate is positive but too small to select any sample."""


@dataclass(eq=False)
class LabeledDataset:
    """Images stored as uint8 levels, shape (N, C, H, W)."""

    pixels: np.ndarray
    labels: np.ndarray
    class_count: int
    space: str = "RGB"

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.pixels.ndim != 4:
            raise InvalidInput(f"pixels must be (N, C, H, W), got {self.pixels.shape}")
        if len(self.pixels) != len(self.labels):
            raise InvalidInput("images and labels differ in length")
        if self.class_count < 1:
            raise InvalidInput("class_count must be positive")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise InvalidInput("label outside [0, class_count)")

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> ImageTensor:
        return ImageTensor.from_uint8(self.pixels[i], self.space)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.pixels.shape[1:])

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.pixels[idx], self.labels[idx], self.class_count, self.space)

    def features(self) -> np.ndarray:
        """Flattened inputs in [0, 1] for the classifier."""
        return self.pixels.reshape(len(self), -1).astype(np.float64) / 255.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.space == other.space
            and np.array_equal(self.pixels, other.pixels)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None  # type: ignore[assignment]


# --- CIFAR-10 binary -------------------------------------------------------


def parse_cifar10(raw: bytes) -> LabeledDataset:
    if len(raw) % CIFAR_RECORD:
        raise FormatError(f"size {len(raw)} is not a multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if len(labels) and labels.max() >= CIFAR_CLASSES:
        bad = int(np.argmax(labels >= CIFAR_CLASSES))
        raise FormatError(f"record {bad} has label byte {labels[bad]} >= {CIFAR_CLASSES}")
    pixels = rec[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE).copy()
    return LabeledDataset(pixels, labels, CIFAR_CLASSES)


def load_cifar10(path) -> LabeledDataset:
    return parse_cifar10(Path(path).read_bytes())


def load_cifar10_files(paths) -> LabeledDataset:
    parts = [load_cifar10(p) for p in paths]
    return LabeledDataset(
        np.concatenate([p.pixels for p in parts]),
        np.concatenate([p.labels for p in parts]),
        CIFAR_CLASSES,
    )


def cifar10_bytes(ds: LabeledDataset) -> bytes:
    if ds.image_shape != (3, CIFAR_SIDE, CIFAR_SIDE):
        raise InvalidInput(f"CIFAR-10 layout needs 3x32x32 images, got {ds.image_shape}")
    if ds.class_count > 256:
        raise InvalidInput("labels do not fit in one byte")
    rec = np.empty((len(ds), CIFAR_RECORD), dtype=np.uint8)
    rec[:, 0] = ds.labels
    rec[:, 1:] = ds.pixels.reshape(len(ds), -1)
    return rec.tobytes()


def save_cifar10(ds: LabeledDataset, path) -> None:
    Path(path).write_bytes(cifar10_bytes(ds))


# --- PPM -------------------------------------------------------------------

_WS = b" \t\n\r\v\f"


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise FormatError("truncated PPM header")
        c = data[i : i + 1]
        if c in _WS:
            i += 1
        elif c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < len(data) and data[j : j + 1] not in _WS and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    # exactly one whitespace byte separates maxval from the raster
    if i >= len(data) or data[i : i + 1] not in _WS:
        raise FormatError("missing whitespace after PPM header")
    return tokens, i + 1


def parse_ppm(data: bytes) -> ImageTensor:
    if data[:2] != b"P6":
        raise FormatError(f"unsupported magic {data[:2]!r}; only binary P6 is handled")
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"malformed PPM header {tokens!r}") from None
    if maxval != 255:
        raise FormatError(f"maxval {maxval} unsupported; expected 255")
    if width < 1 or height < 1:
        raise FormatError("PPM has zero area")
    need = width * height * 3
    body = data[offset : offset + need]
    if len(body) != need:
        raise FormatError(f"PPM raster has {len(body)} bytes, expected {need}")
    hwc = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)
    return ImageTensor.from_uint8(hwc.transpose(2, 0, 1), "RGB")


def load_ppm(path) -> ImageTensor:
    return parse_ppm(Path(path).read_bytes())


def ppm_bytes(img: ImageTensor) -> bytes:
    levels = img.to_uint8()
    if img.space == "YUV":
        raise InvalidInput("convert YUV images to RGB before writing PPM")
    if levels.shape[0] == 1:
        levels = np.repeat(levels, 3, axis=0)
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(levels.transpose(1, 2, 0)).tobytes()


def save_ppm(img: ImageTensor, path) -> None:
    Path(path).write_bytes(ppm_bytes(img))


# --- poisoning -------------------------------------------------------------


def poison_count(rate: float, n: int) -> int:
    """floor(rate * n), evaluated on the decimal value of ``rate``."""
    return math.floor(Fraction(repr(float(rate))) * n)


@dataclass(frozen=True)
class DatasetManifest:
    config_hash: str
    poisoned_indices: tuple[int, ...]
    original_labels: tuple[int, ...]
    target_label: int
    trigger_digest: str
    tool_version: str = __version__

    def __post_init__(self):
        idx = self.poisoned_indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidInput("poisoned_indices must be strictly increasing")
        if len(idx) != len(self.original_labels):
            raise InvalidInput("original_labels must align with poisoned_indices")

    def _body(self) -> dict:
        d = asdict(self)
        d["poisoned_indices"] = list(self.poisoned_indices)
        d["original_labels"] = list(self.original_labels)
        return d

    def digest(self) -> str:
        canon = json.dumps(self._body(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def to_json(self) -> str:
        body = self._body()
        body["digest"] = self.digest()
        return json.dumps(body, sort_keys=True, separators=(",", ":")) + "\n"


def save_manifest(m: DatasetManifest, path) -> None:
    Path(path).write_text(m.to_json(), encoding="utf-8")


def manifest_from_json(text: str) -> DatasetManifest:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"manifest is not valid JSON: {e}") from None
    fields = set(DatasetManifest.__dataclass_fields__)
    if not isinstance(d, dict) or set(d) != fields | {"digest"}:
        raise FormatError("manifest keys do not match the expected schema")
    stored = d.pop("digest")
    try:
        m = DatasetManifest(
            config_hash=d["config_hash"],
            poisoned_indices=tuple(int(i) for i in d["poisoned_indices"]),
            original_labels=tuple(int(i) for i in d["original_labels"]),
            target_label=int(d["target_label"]),
            trigger_digest=d["trigger_digest"],
            tool_version=d["tool_version"],
        )
    except (InvalidInput, TypeError, ValueError) as e:
        raise FormatError(f"malformed manifest: {e}") from None
    if m.digest() != stored:
        raise FormatError("manifest digest mismatch; file was modified")
    return m


def load_manifest(path) -> DatasetManifest:
    return manifest_from_json(Path(path).read_text(encoding="utf-8"))


def _check_target(ds: LabeledDataset, cfg: PoisonConfig) -> None:
    if not 0 <= cfg.target_label < ds.class_count:
        raise InvalidInput(
            f"target label {cfg.target_label} outside [0, {ds.class_count})"
        )


def _prepared_trigger(ds: LabeledDataset, trigger: ImageTensor) -> ImageTensor:
    _, h, w = ds.image_shape
    return prepare_trigger(trigger, h, w)


def build_poisoned_set(
    ds: LabeledDataset, trigger: ImageTensor, cfg: PoisonConfig
) -> tuple[LabeledDataset, DatasetManifest]:
    """All-to-one poisoning of floor(p * N) samples chosen from ``cfg.seed``.

    Chosen samples are replaced by their poisoned version and relabelled to
    ``cfg.target_label``; every other sample is copied untouched.
    """
    _check_target(ds, cfg)
    trig = _prepared_trigger(ds, trigger)
    n = len(ds)
    m = poison_count(cfg.poison_rate, n)
    if m == 0 and cfg.poison_rate > 0:
        warnings.warn(
            f"poison rate {cfg.poison_rate} selects no sample out of {n}", PoisonRateWarning
        )
    idx = sample_indices(n, m, cfg.seed)
    pixels = ds.pixels.copy()
    labels = ds.labels.copy()
    for i in idx:
        pixels[i] = embed(ds[i], trig, cfg).to_uint8()
    labels[idx] = cfg.target_label
    manifest = DatasetManifest(
        config_hash=cfg.config_hash(),
        poisoned_indices=tuple(int(i) for i in idx),
        original_labels=tuple(int(v) for v in ds.labels[idx]),
        target_label=cfg.target_label,
        trigger_digest=trigger_digest(trig),
    )
    return LabeledDataset(pixels, labels, ds.class_count, ds.space), manifest


def apply_trigger_to_test_set(
    ds: LabeledDataset, trigger: ImageTensor, cfg: PoisonConfig
) -> LabeledDataset:
    """Poison every test sample whose true label differs from the target.

    True labels are kept so the caller can still see what each sample was;
    samples already of the target class are dropped.
    """
    _check_target(ds, cfg)
    trig = _prepared_trigger(ds, trigger)
    keep = np.flatnonzero(ds.labels != cfg.target_label)
    pixels = np.empty((len(keep),) + ds.image_shape, dtype=np.uint8)
    for out_i, i in enumerate(keep):
        pixels[out_i] = embed(ds[i], trig, cfg).to_uint8()
    return LabeledDataset(pixels, ds.labels[keep], ds.class_count, ds.space)


def restore_labels(ds: LabeledDataset, manifest: DatasetManifest) -> np.ndarray:
    """Clean labelling of a poisoned set, rebuilt from its manifest."""
    labels = ds.labels.copy()
    labels[list(manifest.poisoned_indices)] = manifest.original_labels
    return labels
