"""Command-line entry point.

Exit codes: 0 success, 1 IO or file-format problem, 2 invalid parameters.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .colorspace import ImageTensor
from .dataset import (
    LabeledDataset,
    apply_trigger_to_test_set,
    build_poisoned_set,
    load_cifar10,
    load_ppm,
    save_cifar10,
    save_manifest,
    save_ppm,
)
from .embed import PoisonConfig, default_k, residual
from .errors import FormatError, InvalidInput, TrainingDiverged
from .harness import (
    EvalReport,
    TrainSpec,
    cda_from_predictions,
    asr_from_predictions,
    checkpoint_bytes,
    load_checkpoint,
    train,
)
from .metrics import compare, summarize
from .svd_core import decompose, energy_spectrum

EXIT_IO = 1
EXIT_PARAM = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def _is_ppm(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(2) == b"P6"


def _load_images(path) -> list[ImageTensor] | LabeledDataset:
    """A PPM gives one image; anything else is read as a CIFAR-10 batch."""
    if _is_ppm(path):
        return [load_ppm(path)]
    return load_cifar10(path)


def _as_list(x) -> list[ImageTensor]:
    if isinstance(x, LabeledDataset):
        return [x[i] for i in range(len(x))]
    return x


def cmd_poison(args) -> int:
    ds = load_cifar10(args.dataset)
    trigger = load_ppm(args.trigger)
    variant = args.variant.upper()
    _, h, w = ds.image_shape if len(ds) else (3, 32, 32)
    k = args.k if args.k is not None else default_k(variant, h, w)
    cfg = PoisonConfig(
        variant=variant,
        k=k,
        target_label=args.target,
        poison_rate=args.rate,
        seed=args.seed,
        trigger_source=Path(args.trigger).name,
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        poisoned, manifest = build_poisoned_set(ds, trigger, cfg)
    for w_ in caught:
        print(f"warning: {w_.message}", file=sys.stderr)
    save_cifar10(poisoned, args.out)
    save_manifest(manifest, args.manifest)
    if args.config_out:
        Path(args.config_out).write_text(cfg.to_json(), encoding="utf-8")
    print(f"samples       {len(ds)}")
    print(f"poisoned      {len(manifest.poisoned_indices)}")
    print(f"variant       {variant}  k={k}  target={args.target}")
    print(f"config_hash   {cfg.config_hash()}")
    return 0


def cmd_metrics(args) -> int:
    clean = _as_list(_load_images(args.clean))
    poisoned = _as_list(_load_images(args.poisoned))
    if len(clean) != len(poisoned):
        raise FormatError(f"{len(clean)} clean images but {len(poisoned)} poisoned")
    if not clean:
        raise FormatError("no images to compare")
    report = compare(clean[0], poisoned[0]) if len(clean) == 1 else summarize(zip(clean, poisoned))
    sys.stdout.write(report.to_json() if args.json else report.to_table())
    return 0


def cmd_inspect(args) -> int:
    clean = _as_list(_load_images(args.clean))
    poisoned = _as_list(_load_images(args.poisoned))
    if args.index >= min(len(clean), len(poisoned)):
        raise InvalidInput(f"index {args.index} out of range")
    a, b = clean[args.index], poisoned[args.index]
    if a.shape != b.shape:
        raise FormatError(f"shape mismatch: {a.shape} vs {b.shape}")
    res = residual(a, b)
    save_ppm(res, args.out_residual)
    diff = np.abs(a.to_uint8().astype(int) - b.to_uint8().astype(int))
    print(f"max_abs_diff_levels  {int(diff.max())}")
    print(f"changed_values       {int(np.count_nonzero(diff))} / {diff.size}")
    return 0


def cmd_train(args) -> int:
    ds = load_cifar10(args.train_set)
    spec = TrainSpec()
    if args.spec_json:
        spec = TrainSpec.from_json(Path(args.spec_json).read_text(encoding="utf-8"))
    if args.seed is not None:
        spec = TrainSpec(**{**spec.__dict__, "seed": args.seed})
    history: list[float] = []
    model = train(ds, spec, history)
    blob = checkpoint_bytes(model)
    Path(args.out_model).write_bytes(blob)
    print(f"samples       {len(ds)}")
    print(f"loss          {history[0]:.6f} -> {history[-1]:.6f}")
    print(f"checkpoint    sha256:{hashlib.sha256(blob).hexdigest()}")
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    clean = load_cifar10(args.clean_test)
    if int(np.prod(clean.image_shape)) != model.input_dim or clean.class_count != model.classes:
        raise FormatError("checkpoint does not match the test set shape or class count")
    trigger = load_ppm(args.trigger)
    try:
        cfg = PoisonConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise FormatError(f"config is not valid JSON: {e}") from None
    poisoned = apply_trigger_to_test_set(clean, trigger, cfg)
    if len(clean) == 0 or len(poisoned) == 0:
        raise InvalidInput("evaluation sets must be non-empty")
    clean_pred = model.predict(clean.features())
    poison_pred = model.predict(poisoned.features())
    cda, per_class = cda_from_predictions(clean_pred, clean.labels, clean.class_count)
    asr = asr_from_predictions(poison_pred, cfg.target_label)
    report = EvalReport(cda, asr, per_class, len(clean), len(poisoned))
    if args.dump_predictions:
        Path(args.dump_predictions).write_text(
            json.dumps(
                {
                    "clean": clean_pred.tolist(),
                    "clean_labels": clean.labels.tolist(),
                    "poisoned": poison_pred.tolist(),
                    "target_label": cfg.target_label,
                },
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    if args.json:
        sys.stdout.write(report.to_json())
    else:
        print(f"CDA  {cda:.4f}  ({report.n_clean_eval} clean samples)")
        print(f"ASR  {asr:.4f}  ({report.n_poison_eval} triggered samples)")
    return 0


def cmd_svd_info(args) -> int:
    img = load_ppm(args.image)
    channels = range(img.channels) if args.channel is None else [args.channel]
    for c in channels:
        if not 0 <= c < img.channels:
            raise InvalidInput(f"channel {c} out of range")
        f = decompose(img.planes[c])
        cum = energy_spectrum(f)
        print(f"# channel {c}")
        print(f"{'index':>5} {'sigma':>22} {'cum_energy':>12}")
        for i, (s, e) in enumerate(zip(f.sigma, cum), start=1):
            print(f"{i:>5} {s:>22.15e} {e:>12.8f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _ArgumentParser(prog="deba", description="SVD tail-splice backdoor poisoning toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    s = sub.add_parser("poison", help="poison a CIFAR-10 binary batch")
    s.add_argument("--dataset", required=True)
    s.add_argument("--trigger", required=True, help="trigger image (PPM P6)")
    s.add_argument("--variant", choices=["rgb", "uv"], default="rgb")
    s.add_argument("--k", type=int, default=None, help="tail triplets (default per image size)")
    s.add_argument("--rate", type=float, default=0.1)
    s.add_argument("--target", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--config-out", default=None, help="also write the attack config as JSON")
    s.set_defaults(func=cmd_poison)

    s = sub.add_parser("metrics", help="PSNR/SSIM between clean and poisoned images")
    s.add_argument("--clean", required=True)
    s.add_argument("--poisoned", required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("inspect", help="write the spatial residual image")
    s.add_argument("--clean", required=True)
    s.add_argument("--poisoned", required=True)
    s.add_argument("--out-residual", required=True)
    s.add_argument("--index", type=int, default=0, help="record index for dataset inputs")
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("train", help="train the victim MLP")
    s.add_argument("--train-set", required=True)
    s.add_argument("--spec-json", default=None)
    s.add_argument("--out-model", required=True)
    s.add_argument("--seed", type=int, default=None, help="overrides the seed in --spec-json")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="report CDA and ASR of a checkpoint")
    s.add_argument("--model", required=True)
    s.add_argument("--clean-test", required=True)
    s.add_argument("--trigger", required=True)
    s.add_argument("--config", required=True, help="attack config JSON (see poison --config-out)")
    s.add_argument("--json", action="store_true")
    s.add_argument("--dump-predictions", default=None)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("svd-info", help="print the singular-value spectrum of an image")
    s.add_argument("--image", required=True)
    s.add_argument("--channel", type=int, default=None)
    s.set_defaults(func=cmd_svd_info)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_PARAM
    try:
        return args.func(args)
    except (FormatError, OSError, TrainingDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (InvalidInput, ValueError, TypeError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
