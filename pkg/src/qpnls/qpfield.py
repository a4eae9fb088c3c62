"""Quasiperiodic fields: coefficient tensors, parent-grid samples and norms.

A :class:`QPState` holds the coefficients ``c_k`` of
``psi(x) = sum_k c_k exp(i (P k) . x)`` in FFT storage order; a
:class:`GridField` holds the parent function sampled on the uniform
``(2N)^n`` grid of the torus.  The two are related by the normalised FFT
pair below, so the coefficient l2 norm is the L2_QP norm of the field.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import LatticeMismatch, ShapeMismatch
from .lattice import FrequencyLattice

_FMT = ".17g"


@dataclass(frozen=True, eq=False)
class QPState:
    lattice: FrequencyLattice
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.lattice.shape:
            raise ShapeMismatch(f"coefficients {c.shape} vs lattice {self.lattice.shape}")
        object.__setattr__(self, "coeffs", c)

    def coefficient(self, k) -> complex:
        return complex(self.coeffs[self.lattice.storage_index(k)])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def __add__(self, other):
        _check_same(self, other)
        return QPState(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return QPState(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return QPState(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, lattice):
        return cls(lattice, np.zeros(lattice.shape, dtype=complex))

    @classmethod
    def single_mode(cls, lattice, k, amplitude=1.0):
        c = np.zeros(lattice.shape, dtype=complex)
        c[lattice.storage_index(k)] = amplitude
        return cls(lattice, c)

    @classmethod
    def from_rule(cls, lattice, rule):
        """Evaluate ``rule(k)`` (vectorised over mode grids) at every lattice mode."""
        return cls(lattice, np.asarray(rule(*lattice.mode_grids()), dtype=complex))


@dataclass(frozen=True, eq=False)
class GridField:
    lattice: FrequencyLattice
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.lattice.shape:
            raise ShapeMismatch(f"grid values {v.shape} vs lattice {self.lattice.shape}")
        object.__setattr__(self, "values", v)


def _check_same(a, b):
    if a.lattice is b.lattice:
        return
    if a.lattice.N != b.lattice.N or not a.lattice.compatible(b.lattice):
        raise LatticeMismatch("states live on different lattices")


def forward_transform(g: GridField) -> QPState:
    """Grid samples to coefficients, ``c_k = (2N)^-n sum_j g_j exp(-i k.y_j)``."""
    return QPState(g.lattice, np.fft.fftn(g.values, norm="forward"))


def inverse_transform(s: QPState) -> GridField:
    """Coefficients to grid samples, ``g_j = sum_k c_k exp(i k.y_j)``."""
    return GridField(s.lattice, np.fft.ifftn(s.coeffs, norm="forward"))


def interpolate(samples_of_parent: GridField) -> QPState:
    """Trigonometric interpolant on the truncated lattice (same as the FFT)."""
    return forward_transform(samples_of_parent)


def sample_parent(lattice: FrequencyLattice, fn) -> GridField:
    """Evaluate ``fn(y_1, ..., y_n)`` on the collocation grid."""
    return GridField(lattice, np.asarray(fn(*lattice.grid_points()), dtype=complex))


def l2_norm(s: QPState) -> float:
    return float(np.linalg.norm(s.coeffs.ravel()))


def inner_product(a: QPState, b: QPState) -> complex:
    """``sum_k a_k conj(b_k)``; linear in the first argument."""
    _check_same(a, b)
    return complex(np.vdot(b.coeffs.ravel(), a.coeffs.ravel()))


def x_alpha_norm(s: QPState, alpha: float) -> float:
    """Parent Sobolev norm ``sqrt(sum (1 + |k|^(4 alpha)) |c_k|^2)``.

    ``alpha = 0`` is taken to be the plain l2 norm rather than twice its square.
    Uses parent-mode norms ``|k|``, not the physical ``|P k|``.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha == 0:
        return l2_norm(s)
    ksq = sum(g.astype(float) ** 2 for g in s.lattice.mode_grids())
    w = 1.0 + ksq ** (2 * alpha)
    return float(np.sqrt(np.sum(w * np.abs(s.coeffs) ** 2)))


def _mode_map(coarse: FrequencyLattice, fine: FrequencyLattice):
    """Index arrays placing coarse storage positions inside the fine tensor."""
    m = coarse.axis_modes()
    idx = m % (2 * fine.N)
    return np.ix_(*([idx] * coarse.n))


def _ordered(a, b):
    if a.lattice.n != b.lattice.n or not a.lattice.compatible(b.lattice):
        raise LatticeMismatch("lattices have different projection matrices")
    return (a, b) if a.lattice.N <= b.lattice.N else (b, a)


def embed(s: QPState, fine: FrequencyLattice) -> QPState:
    """Zero-pad ``s`` onto a lattice with ``fine.N >= s.lattice.N``."""
    if fine.N < s.lattice.N or not fine.compatible(s.lattice):
        raise LatticeMismatch("target lattice does not contain the source lattice")
    c = np.zeros(fine.shape, dtype=complex)
    c[_mode_map(s.lattice, fine)] = s.coeffs
    return QPState(fine, c)


def restrict(s: QPState, coarse: FrequencyLattice) -> QPState:
    """Keep only the coefficients of ``s`` that belong to ``coarse``."""
    if coarse.N > s.lattice.N or not coarse.compatible(s.lattice):
        raise LatticeMismatch("target lattice is not contained in the source lattice")
    return QPState(coarse, s.coeffs[_mode_map(coarse, s.lattice)].copy())


def l2_error(a: QPState, b: QPState, *, over: str = "union") -> float:
    """Coefficient-space distance between two states.

    ``over="union"`` zero-pads the coarser state onto the finer lattice, so
    modes the coarse state lacks count in full.  ``over="coarse"`` compares
    only the modes of the coarser lattice.
    """
    lo, hi = _ordered(a, b)
    if over == "union":
        lo = embed(lo, hi.lattice)
    elif over == "coarse":
        hi = restrict(hi, lo.lattice)
    else:
        raise ValueError(f"unknown error measure {over!r}")
    return float(np.linalg.norm((lo.coeffs - hi.coeffs).ravel()))


def evaluate_at_points(s: QPState, xs, chunk: int = 256) -> np.ndarray:
    """Direct Fourier-Bohr sum ``psi(x) = sum_k c_k exp(i (P k) . x)``.

    ``xs`` has shape ``(m, d)`` (a flat array is accepted when ``d == 1``).
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1 and s.lattice.d == 1:
        xs = xs[:, None]
    xs = np.atleast_2d(xs)
    if xs.shape[1] != s.lattice.d:
        raise ShapeMismatch(f"points have dimension {xs.shape[1]}, expected {s.lattice.d}")
    lam = s.lattice.lambdas
    c = s.coeffs.ravel()
    out = np.empty(len(xs), dtype=complex)
    for i in range(0, len(xs), chunk):
        phase = xs[i : i + chunk] @ lam
        out[i : i + chunk] = np.exp(1j * phase) @ c
    return out


def write_coeffs_csv(s: QPState, path) -> None:
    """Dump ``k_1..k_n,re,im`` rows in lattice storage order."""
    n = s.lattice.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"k_{i + 1}" for i in range(n)] + ["re", "im"])
        for k, v in zip(s.lattice.index_set, s.coeffs.ravel()):
            w.writerow([*map(int, k), format(v.real, _FMT), format(v.imag, _FMT)])


def read_coeffs_csv(path, lattice: FrequencyLattice) -> QPState:
    c = np.zeros(lattice.shape, dtype=complex)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if len(header) != lattice.n + 2:
            raise ShapeMismatch(f"CSV has {len(header) - 2} mode columns, lattice n={lattice.n}")
        for row in r:
            k = [int(v) for v in row[: lattice.n]]
            c[lattice.storage_index(k)] = complex(float(row[-2]), float(row[-1]))
    return QPState(lattice, c)


def write_grid_csv(g: GridField, path) -> None:
    n = g.lattice.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"j_{i + 1}" for i in range(n)] + ["re", "im"])
        for j in product(range(2 * g.lattice.N), repeat=n):
            v = g.values[j]
            w.writerow([*j, format(v.real, _FMT), format(v.imag, _FMT)])
