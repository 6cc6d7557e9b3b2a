"""Shared domain types: state vectors, diagonal matrices, RNG streams, and
small dense linear-algebra helpers (PSD square root) used everywhere else."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimension, NotPSD, NotSymmetric

# Any state component beyond this magnitude is treated as divergence.
DIVERGENCE_THRESHOLD = 1e150


@dataclass(frozen=True)
class StateVector:
    """A point z = (x, y) in R^d x R^d with the saddle split explicit."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape or x.size < 1:
            raise InvalidDimension(f"x and y must be equal-length vectors, got {x.shape} and {y.shape}")

    @property
    def d(self) -> int:
        return self.x.size

    @property
    def z(self) -> np.ndarray:
        """Concatenated view (x, y) of length 2d."""
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_z(cls, z: np.ndarray) -> "StateVector":
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.size % 2 != 0 or z.size < 2:
            raise InvalidDimension(f"concatenated state must have even length >= 2, got {z.size}")
        d = z.size // 2
        return cls(z[:d], z[d:])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))
                    and np.all(np.abs(self.x) < DIVERGENCE_THRESHOLD)
                    and np.all(np.abs(self.y) < DIVERGENCE_THRESHOLD))


@dataclass(frozen=True)
class DiagMatrix:
    """A square diagonal matrix stored as its diagonal entries."""

    entries: np.ndarray
    psd: bool = False

    def __post_init__(self):
        e = np.atleast_1d(np.asarray(self.entries, dtype=float))
        object.__setattr__(self, "entries", e)
        if e.ndim != 1 or e.size < 1:
            raise InvalidDimension("diagonal entries must be a non-empty vector")
        if self.psd and np.any(e < 0):
            raise NotPSD("diagonal matrix flagged psd has a negative entry")

    @property
    def d(self) -> int:
        return self.entries.size

    def dense(self) -> np.ndarray:
        return np.diag(self.entries)

    @classmethod
    def of(cls, value, d: int, psd: bool = False) -> "DiagMatrix":
        """Broadcast a scalar (or accept a length-d vector) to a DiagMatrix."""
        v = np.atleast_1d(np.asarray(value, dtype=float))
        if v.size == 1:
            v = np.full(d, v[0])
        if v.size != d:
            raise InvalidDimension(f"expected scalar or length-{d} vector, got length {v.size}")
        return cls(v, psd=psd)


class RngStream:
    """Counter-style splittable random stream keyed by (base_seed, run_index).

    Streams with equal keys reproduce the same draw sequence bit for bit;
    distinct run indices give statistically independent streams.
    """

    def __init__(self, base_seed: int, run_index: int = 0):
        self.base_seed = int(base_seed)
        self.run_index = int(run_index)
        seq = np.random.SeedSequence(entropy=self.base_seed, spawn_key=(self.run_index,))
        self._gen = np.random.Generator(np.random.Philox(seq))

    def standard_normal(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    def __repr__(self):
        return f"RngStream(base_seed={self.base_seed}, run_index={self.run_index})"


def gaussian_vector(rng: RngStream, dim: int, scale: float) -> np.ndarray:
    """scale * standard normal i.i.d. vector of length dim."""
    if dim < 1:
        raise InvalidDimension("dim must be >= 1")
    if scale < 0:
        raise InvalidDimension("scale must be >= 0")
    return scale * rng.standard_normal(dim)


def psd_sqrt(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-tol, 0) are clipped to zero; anything below -tol means
    the input is not a valid covariance and raises NotPSD.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidDimension(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    sym = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(sym)
    if np.min(w) < -tol * scale:
        raise NotPSD(f"matrix has eigenvalue {np.min(w):.3e} below -tol")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def psd_sqrt_stacked(ms: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """psd_sqrt applied over a stack of matrices of shape (..., n, n)."""
    ms = np.asarray(ms, dtype=float)
    sym = 0.5 * (ms + np.swapaxes(ms, -1, -2))
    w, v = np.linalg.eigh(sym)
    scale = np.maximum(1.0, np.max(np.abs(ms), axis=(-1, -2)))
    if np.any(w[..., 0] < -tol * scale):
        raise NotPSD("a stacked covariance has an eigenvalue below -tol")
    w = np.clip(w, 0.0, None)
    return np.einsum("...ik,...k,...jk->...ij", v, np.sqrt(w), v)
