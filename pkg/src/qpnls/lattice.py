"""Projection matrices and truncated parent-mode lattices.

A quasiperiodic field on R^d is carried by a periodic parent function on the
n-torus.  The d x n projection matrix ``P`` sends an integer parent mode
``k`` to the physical Fourier exponent ``lambda = P k``.  Mode storage follows
the usual FFT wraparound layout: along every axis, storage index ``j < N``
holds mode ``j`` and ``j >= N`` holds ``j - 2N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CollisionError, DimensionMismatch, RankError

RANK_TOL = 1e-12
COLLISION_TOL = 1e-10


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """Real d x n matrix mapping parent modes to physical frequencies.

    Parameters
    ----------
    entries : array_like, shape (d, n)
        Row-major matrix entries.  A 1-D sequence is read as a single row.
    rank_tol : float
        Relative threshold on the smallest singular value.
    """

    entries: np.ndarray
    rank_tol: float = RANK_TOL

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if a.ndim != 2:
            raise DimensionMismatch(f"projection matrix must be 2-D, got ndim={a.ndim}")
        d, n = a.shape
        if d < 1 or n < d:
            raise DimensionMismatch(f"need 1 <= d <= n, got d={d}, n={n}")
        if not np.all(np.isfinite(a)):
            raise RankError("projection matrix has non-finite entries")
        object.__setattr__(self, "entries", _readonly(a))
        sv = self.singular_values
        if not sv[0] > 0 or not sv[d - 1] > self.rank_tol * sv[0]:
            raise RankError(
                f"projection matrix is rank deficient: singular values {sv.tolist()}"
            )

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.entries, compute_uv=False)

    def max_singular_value(self) -> float:
        return float(self.singular_values[0])

    def same_as(self, other: "ProjectionMatrix") -> bool:
        return self.entries.shape == other.entries.shape and np.array_equal(
            self.entries, other.entries
        )

    def __repr__(self):
        return f"ProjectionMatrix({self.entries.tolist()!r})"


def max_singular_value(P: ProjectionMatrix) -> float:
    return P.max_singular_value()


def lambda_of(P: ProjectionMatrix, k) -> np.ndarray:
    """Physical frequency ``P @ k`` for an integer parent mode ``k``."""
    k = np.asarray(k)
    if k.shape != (P.n,):
        raise DimensionMismatch(f"mode has shape {k.shape}, expected ({P.n},)")
    return P.entries @ k.astype(float)


def axis_modes(N: int) -> np.ndarray:
    """Integer modes along one axis in FFT storage order."""
    j = np.arange(2 * N)
    return np.where(j < N, j, j - 2 * N)


def min_frequency_gap(P: ProjectionMatrix, N: int) -> float:
    """Smallest ``|P (k - k')|`` over distinct ``k, k'`` in the truncated lattice.

    Every difference ``k - k'`` has components in ``[-(2N-1), 2N-1]``, so
    scanning the difference box is equivalent to scanning all pairs, at
    ``(4N-1)^n`` instead of ``(2N)^(2n)`` cost.  The scan is chunked over the
    first axis to bound memory.
    """
    r = np.arange(-(2 * N - 1), 2 * N)
    A = P.entries
    if P.n == 1:
        lam = np.outer(A[:, 0], r[r != 0])
        return float(np.sqrt((lam**2).sum(axis=0)).min())
    rest = np.meshgrid(*([r] * (P.n - 1)), indexing="ij")
    rest_lam = np.tensordot(A[:, 1:], np.stack(rest), axes=(1, 0)).reshape(P.d, -1)
    zero_rest = np.all(np.stack([g.ravel() == 0 for g in rest]), axis=0)
    best = np.inf
    for k0 in r:
        lam = rest_lam + (A[:, 0] * k0)[:, None]
        sq = (lam**2).sum(axis=0)
        if k0 == 0:
            sq = sq[~zero_rest]
        best = min(best, float(sq.min()))
    return float(np.sqrt(best))


@dataclass(frozen=True, eq=False)
class FrequencyLattice:
    """Truncated index set ``K_N^n = {-N, ..., N-1}^n`` in FFT layout."""

    P: ProjectionMatrix
    N: int
    lambda_sq: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.P.n

    @property
    def d(self) -> int:
        return self.P.d

    @property
    def shape(self) -> tuple:
        return (2 * self.N,) * self.n

    @property
    def size(self) -> int:
        return (2 * self.N) ** self.n

    @property
    def h(self) -> float:
        return np.pi / self.N

    def axis_modes(self) -> np.ndarray:
        return axis_modes(self.N)

    def mode_grids(self) -> list:
        """One integer array of shape ``self.shape`` per parent axis."""
        m = axis_modes(self.N)
        return np.meshgrid(*([m] * self.n), indexing="ij")

    @cached_property
    def index_set(self) -> np.ndarray:
        """All modes as an ``(size, n)`` integer array, in storage (C) order."""
        return np.stack([g.ravel() for g in self.mode_grids()], axis=1)

    @cached_property
    def lambdas(self) -> np.ndarray:
        """Physical frequencies ``P k`` as a ``(d, size)`` array, storage order."""
        return self.P.entries @ self.index_set.T.astype(float)

    def grid_points(self) -> list:
        """Per-axis collocation grids ``y_j = j h`` as meshgrid arrays."""
        y = np.arange(2 * self.N) * self.h
        return np.meshgrid(*([y] * self.n), indexing="ij")

    def storage_index(self, k) -> tuple:
        """Storage position of mode ``k``; raises IndexError outside the lattice."""
        k = tuple(int(v) for v in k)
        if len(k) != self.n:
            raise DimensionMismatch(f"mode {k} has wrong length for n={self.n}")
        if any(v < -self.N or v >= self.N for v in k):
            raise IndexError(f"mode {k} outside K_N^n with N={self.N}")
        return tuple(v % (2 * self.N) for v in k)

    def contains(self, k) -> bool:
        return all(-self.N <= int(v) < self.N for v in k)

    def compatible(self, other: "FrequencyLattice") -> bool:
        return self.P.same_as(other.P)


def build_lattice(
    P: ProjectionMatrix, N: int, collision_tol: float = COLLISION_TOL
) -> FrequencyLattice:
    """Build the truncated lattice and verify ``k -> P k`` is injective on it."""
    if int(N) != N or N < 1:
        raise ValueError(f"truncation N must be a positive integer, got {N!r}")
    N = int(N)
    gap = min_frequency_gap(P, N)
    if not gap > collision_tol:
        raise CollisionError(
            f"distinct modes collide at N={N}: min frequency gap {gap:.3e} "
            f"<= tolerance {collision_tol:.1e}"
        )
    m = axis_modes(N).astype(float)
    grids = np.meshgrid(*([m] * P.n), indexing="ij")
    lam = np.tensordot(P.entries, np.stack(grids), axes=(1, 0))
    lambda_sq = (lam**2).sum(axis=0)
    return FrequencyLattice(P=P, N=N, lambda_sq=_readonly(lambda_sq))
