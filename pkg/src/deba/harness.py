"""Small victim classifier and attack measurement.

The victim is a one-hidden-layer ReLU network trained from scratch with
mini-batch SGD plus momentum on softmax cross-entropy. It is deliberately
tiny: the point is to check that a model picks up the spliced trigger, not
to reach state-of-the-art accuracy.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataset import LabeledDataset
from .errors import FormatError, InvalidInput, TrainingDiverged

CHECKPOINT_MAGIC = b"DEBAMLP\x00"
CHECKPOINT_VERSION = 1


@dataclass(eq=False)
class MlpModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def classes(self) -> int:
        return self.w2.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "MlpModel":
        return MlpModel(*(p.copy() for p in self.params()))

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def predict(self, x: np.ndarray, batch: int = 1024) -> np.ndarray:
        out = [np.argmax(self.logits(x[i : i + batch]), axis=1) for i in range(0, len(x), batch)]
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MlpModel):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.params(), other.params()))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class TrainSpec:
    hidden_units: int = 256
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1 or self.batch_size < 1:
            raise InvalidInput("hidden_units and batch_size must be positive")
        if self.epochs < 0 or self.learning_rate <= 0 or self.momentum < 0:
            raise InvalidInput("epochs, learning_rate and momentum must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise InvalidInput("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_json(cls, text: str) -> "TrainSpec":
        d = json.loads(text)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInput(f"unknown train spec keys: {sorted(unknown)}")
        return cls(**d)


def init_model(input_dim: int, hidden: int, classes: int, rng: np.random.Generator) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    a1 = np.sqrt(6.0 / (input_dim + hidden))
    a2 = np.sqrt(6.0 / (hidden + classes))
    return MlpModel(
        w1=rng.uniform(-a1, a1, size=(input_dim, hidden)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-a2, a2, size=(hidden, classes)),
        b2=np.zeros(classes),
    )


def loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy over the batch and its gradients w.r.t. each parameter."""
    n = len(x)
    pre = x @ model.w1 + model.b1
    h = np.maximum(pre, 0.0)
    z = h @ model.w2 + model.b2
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), y]))

    dz = np.exp(z - logsum[:, None])
    dz[np.arange(n), y] -= 1.0
    dz /= n
    gw2 = h.T @ dz
    gb2 = dz.sum(axis=0)
    dh = (dz @ model.w2.T) * (pre > 0)
    gw1 = x.T @ dh
    gb1 = dh.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2]


def dataset_loss(model: MlpModel, x: np.ndarray, y: np.ndarray, batch: int = 2048) -> float:
    total = 0.0
    for i in range(0, len(x), batch):
        z = model.logits(x[i : i + batch])
        z = z - z.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(z).sum(axis=1))
        total += float(np.sum(logsum - z[np.arange(len(z)), y[i : i + batch]]))
    return total / len(x)


def train(
    ds: LabeledDataset, spec: TrainSpec = TrainSpec(), history: list[float] | None = None
) -> MlpModel:
    """Fit the MLP.

    If ``history`` is given, the full-set loss before training and after each
    epoch is appended to it.
    """
    if len(ds) == 0:
        raise InvalidInput("cannot train on an empty dataset")
    x = ds.features()
    y = ds.labels
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    model = init_model(x.shape[1], spec.hidden_units, ds.class_count, rng)
    velocity = [np.zeros_like(p) for p in model.params()]
    if history is None:
        history = []
    history.append(dataset_loss(model, x, y))
    for epoch in range(spec.epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), spec.batch_size):
            b = order[start : start + spec.batch_size]
            loss, grads = loss_and_grads(model, x[b], y[b])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
            for p, v, g in zip(model.params(), velocity, grads):
                v *= spec.momentum
                v += g
                p -= spec.learning_rate * v
        epoch_loss = dataset_loss(model, x, y)
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(f"non-finite loss after epoch {epoch}")
        history.append(epoch_loss)
    return model


def _check_inputs(model: MlpModel, ds: LabeledDataset) -> None:
    if len(ds) == 0:
        raise InvalidInput("evaluation set is empty")
    dim = int(np.prod(ds.image_shape))
    if dim != model.input_dim:
        raise InvalidInput(f"model expects {model.input_dim} inputs, dataset gives {dim}")
    if ds.class_count != model.classes:
        raise InvalidInput(f"model has {model.classes} classes, dataset {ds.class_count}")


def cda_from_predictions(pred: np.ndarray, labels: np.ndarray, class_count: int):
    correct = pred == labels
    per_class: list[float | None] = []
    for c in range(class_count):
        mask = labels == c
        n = int(mask.sum())
        per_class.append(int(correct[mask].sum()) / n if n else None)
    return int(correct.sum()) / len(labels), per_class


def asr_from_predictions(pred: np.ndarray, target_label: int) -> float:
    return int(np.sum(pred == target_label)) / len(pred)


def evaluate_cda(model: MlpModel, clean_test: LabeledDataset):
    """Clean accuracy and per-class accuracy (None for absent classes)."""
    _check_inputs(model, clean_test)
    pred = model.predict(clean_test.features())
    return cda_from_predictions(pred, clean_test.labels, clean_test.class_count)


def evaluate_asr(model: MlpModel, poisoned_test: LabeledDataset, target_label: int):
    """Fraction of triggered inputs sent to ``target_label``, with the count."""
    _check_inputs(model, poisoned_test)
    pred = model.predict(poisoned_test.features())
    return asr_from_predictions(pred, target_label), len(pred)


@dataclass
class EvalReport:
    cda: float
    asr: float
    per_class_accuracy: list
    n_clean_eval: int
    n_poison_eval: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def evaluate(
    model: MlpModel, clean_test: LabeledDataset, poisoned_test: LabeledDataset, target_label: int
) -> EvalReport:
    cda, per_class = evaluate_cda(model, clean_test)
    asr, n_poison = evaluate_asr(model, poisoned_test, target_label)
    return EvalReport(cda, asr, per_class, len(clean_test), n_poison)


# --- checkpoints -----------------------------------------------------------
# layout: magic(8) | version u32 | input u32 | hidden u32 | classes u32 |
#         w1, b1, w2, b2 as little-endian float64, row-major


def checkpoint_bytes(model: MlpModel) -> bytes:
    head = CHECKPOINT_MAGIC + struct.pack(
        "<4I", CHECKPOINT_VERSION, model.input_dim, model.hidden, model.classes
    )
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params())
    return head + body


def parse_checkpoint(data: bytes) -> MlpModel:
    if data[:8] != CHECKPOINT_MAGIC:
        raise FormatError("not a model checkpoint (bad magic)")
    if len(data) < 24:
        raise FormatError("truncated checkpoint header")
    version, d, h, c = struct.unpack("<4I", data[8:24])
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    shapes = [(d, h), (h,), (h, c), (c,)]
    sizes = [int(np.prod(s)) for s in shapes]
    if len(data) != 24 + 8 * sum(sizes):
        raise FormatError("checkpoint size does not match its header")
    flat = np.frombuffer(data, dtype="<f8", offset=24).astype(np.float64)
    parts, pos = [], 0
    for s, n in zip(shapes, sizes):
        parts.append(flat[pos : pos + n].reshape(s).copy())
        pos += n
    if not all(np.all(np.isfinite(p)) for p in parts):
        raise FormatError("checkpoint contains non-finite parameters")
    return MlpModel(*parts)


def save_checkpoint(model: MlpModel, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def load_checkpoint(path) -> MlpModel:
    return parse_checkpoint(Path(path).read_bytes())
