"""Thin SVD of image planes and the tail-splice operation.

Factors are kept in thin form: for an m x n matrix with r = min(m, n),
``u`` is m x r, ``sigma`` has r entries and ``v`` is n x r, so that
``a == u @ diag(sigma) @ v.T``.  The triplet axis is always the
min-dimension axis; ``k`` in :func:`splice_tail` counts from its end.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, KTooLarge


@dataclass(frozen=True, eq=False)
class SvdFactors:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape[0], self.v.shape[0]

    @property
    def rank_dim(self) -> int:
        return self.sigma.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SvdFactors):
            return NotImplemented
        return (
            np.array_equal(self.u, other.u)
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.v, other.v)
        )

    __hash__ = None  # type: ignore[assignment]


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix contains non-finite values")
    return a


def canonicalize_signs(f: SvdFactors) -> SvdFactors:
    """Flip each (u_j, v_j) pair so the largest-magnitude entry of u_j is >= 0.

    Ties go to the lowest row index. The product u diag(sigma) v^T is unchanged.
    """
    u = np.array(f.u, dtype=np.float64, copy=True)
    v = np.array(f.v, dtype=np.float64, copy=True)
    if u.shape[1] == 0:
        return SvdFactors(u, np.array(f.sigma, dtype=np.float64), v)
    pivot = np.argmax(np.abs(u), axis=0)
    flip = u[pivot, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    v[:, flip] *= -1.0
    return SvdFactors(u, np.array(f.sigma, dtype=np.float64, copy=True), v)


def decompose(a) -> SvdFactors:
    """Thin, sign-canonical SVD of a real matrix (double precision)."""
    a = _as_matrix(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    # LAPACK already returns s non-increasing; clip guards against -0.0
    s = np.maximum(s, 0.0)
    return canonicalize_signs(SvdFactors(u, s, vt.T))


def _check_consistent(f: SvdFactors) -> None:
    u, s, v = f.u, f.sigma, f.v
    if u.ndim != 2 or v.ndim != 2 or s.ndim != 1:
        raise InvalidInput("factors must be u (m x r), sigma (r,), v (n x r)")
    if not (u.shape[1] == s.shape[0] == v.shape[1]):
        raise InvalidInput(
            f"inconsistent factor shapes u{u.shape} sigma{s.shape} v{v.shape}"
        )


def reconstruct(f: SvdFactors) -> np.ndarray:
    """Return ``u @ diag(sigma) @ v.T``."""
    _check_consistent(f)
    return (f.u * f.sigma) @ f.v.T


def splice_tail(clean: SvdFactors, trigger: SvdFactors, k: int) -> SvdFactors:
    """Replace the last ``k`` singular triplets of ``clean`` with the trigger's.

    Replacement is positional: no re-sorting happens afterwards, even if a
    trigger tail value exceeds a retained clean value.
    """
    _check_consistent(clean)
    _check_consistent(trigger)
    if clean.shape != trigger.shape:
        raise InvalidInput(
            f"clean factors are {clean.shape} but trigger factors are {trigger.shape}"
        )
    if k < 0:
        raise InvalidInput(f"k must be non-negative, got {k}")
    r = clean.rank_dim
    if k > r:
        raise KTooLarge(f"k={k} exceeds min(m, n)={r}")
    head = r - k
    u = np.concatenate([clean.u[:, :head], trigger.u[:, head:]], axis=1)
    s = np.concatenate([clean.sigma[:head], trigger.sigma[head:]])
    v = np.concatenate([clean.v[:, :head], trigger.v[:, head:]], axis=1)
    return SvdFactors(u, s, v)


def low_rank_head(f: SvdFactors, k: int) -> np.ndarray:
    """Reconstruction from all but the last ``k`` triplets."""
    r = f.rank_dim
    if not 0 <= k <= r:
        raise KTooLarge(f"k={k} outside [0, {r}]")
    head = r - k
    return (f.u[:, :head] * f.sigma[:head]) @ f.v[:, :head].T


def low_rank_tail(f: SvdFactors, k: int) -> np.ndarray:
    """Reconstruction from only the last ``k`` triplets."""
    r = f.rank_dim
    if not 0 <= k <= r:
        raise KTooLarge(f"k={k} outside [0, {r}]")
    head = r - k
    return (f.u[:, head:] * f.sigma[head:]) @ f.v[:, head:].T


def energy_spectrum(f: SvdFactors) -> np.ndarray:
    """Cumulative fraction of squared singular-value energy per index."""
    e = np.cumsum(f.sigma**2)
    total = e[-1] if e.size else 0.0
    if total == 0.0:
        return np.ones_like(e)
    return e / total
