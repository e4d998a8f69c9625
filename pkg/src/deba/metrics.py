"""Stealthiness metrics on 8-bit levels: MSE, PSNR and global SSIM.

SSIM uses whole-plane statistics (no sliding window) with the unbiased
N-1 variance and covariance, L = 255, c1 = (0.01 L)^2, c2 = (0.03 L)^2,
averaged over channels. Windowed SSIM implementations give different
absolute numbers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .colorspace import ImageTensor
from .errors import InvalidInput

MAX_LEVEL = 255.0
C1 = (0.01 * MAX_LEVEL) ** 2
C2 = (0.03 * MAX_LEVEL) ** 2


def _levels(a: ImageTensor, b: ImageTensor) -> tuple[np.ndarray, np.ndarray]:
    if a.shape != b.shape:
        raise InvalidInput(f"image shapes differ: {a.shape} vs {b.shape}")
    return a.to_uint8().astype(np.float64), b.to_uint8().astype(np.float64)


def mse(a: ImageTensor, b: ImageTensor) -> float:
    x, y = _levels(a, b)
    return float(np.mean((x - y) ** 2))


def psnr_from_mse(m: float) -> float:
    if m == 0:
        return math.inf
    return 10.0 * math.log10(MAX_LEVEL**2 / m)


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    return psnr_from_mse(mse(a, b))


def _ssim_planes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = x.shape[1] * x.shape[2]
    xf = x.reshape(x.shape[0], -1)
    yf = y.reshape(y.shape[0], -1)
    mx = xf.mean(axis=1)
    my = yf.mean(axis=1)
    dx = xf - mx[:, None]
    dy = yf - my[:, None]
    vx = (dx * dx).sum(axis=1) / (n - 1)
    vy = (dy * dy).sum(axis=1) / (n - 1)
    cov = (dx * dy).sum(axis=1) / (n - 1)
    num = (2 * mx * my + C1) * (2 * cov + C2)
    den = (mx**2 + my**2 + C1) * (vx + vy + C2)
    return num / den


def ssim_per_channel(a: ImageTensor, b: ImageTensor) -> np.ndarray:
    x, y = _levels(a, b)
    if x.shape[1] * x.shape[2] < 2:
        raise InvalidInput("SSIM needs at least two pixels per plane")
    return _ssim_planes(x, y)


def ssim(a: ImageTensor, b: ImageTensor) -> float:
    return float(np.mean(ssim_per_channel(a, b)))


@dataclass
class MetricReport:
    mse: float
    psnr_db: float
    ssim: float
    n_pairs: int = 1
    n_infinite_psnr: int = 0
    per_channel: dict[str, list[float]] | None = field(default=None)

    def to_dict(self) -> dict:
        psnr_val: float | str | None = self.psnr_db
        if math.isinf(self.psnr_db):
            psnr_val = "inf"
        elif math.isnan(self.psnr_db):
            psnr_val = None
        return {
            "mse": self.mse,
            "n_infinite_psnr": self.n_infinite_psnr,
            "n_pairs": self.n_pairs,
            "psnr_db": psnr_val,
            "ssim": self.ssim,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        def fmt(v: float) -> str:
            if math.isinf(v):
                return "inf"
            if math.isnan(v):
                return "n/a"
            return f"{v:.4f}"

        rows = [
            ("pairs", str(self.n_pairs)),
            ("mse", fmt(self.mse)),
            ("psnr_db", fmt(self.psnr_db)),
            ("ssim", fmt(self.ssim)),
            ("infinite_psnr", str(self.n_infinite_psnr)),
            ("lpips", "n/a"),
        ]
        return "\n".join(f"{name:<14}{value}" for name, value in rows) + "\n"


def compare(a: ImageTensor, b: ImageTensor) -> MetricReport:
    m = mse(a, b)
    p = psnr_from_mse(m)
    per = ssim_per_channel(a, b)
    return MetricReport(
        mse=m,
        psnr_db=p,
        ssim=float(np.mean(per)),
        n_infinite_psnr=int(math.isinf(p)),
        per_channel={"ssim": per.tolist()},
    )


def summarize(pairs: Iterable[tuple[ImageTensor, ImageTensor]]) -> MetricReport:
    """Dataset-mean report; infinite-PSNR pairs are counted, not averaged."""
    reports = [compare(a, b) for a, b in pairs]
    if not reports:
        raise InvalidInput("summarize needs at least one pair")
    finite = [r.psnr_db for r in reports if not math.isinf(r.psnr_db)]
    n_inf = len(reports) - len(finite)
    if finite:
        psnr_mean = math.fsum(finite) / len(finite)
    else:
        psnr_mean = math.inf
    return MetricReport(
        mse=math.fsum(r.mse for r in reports) / len(reports),
        psnr_db=psnr_mean,
        ssim=math.fsum(r.ssim for r in reports) / len(reports),
        n_pairs=len(reports),
        n_infinite_psnr=n_inf,
    )
