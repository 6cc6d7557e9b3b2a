"""Game definitions: the quadratic family and three hard-coded nonbilinear
1-d games, each exposing f, the saddle field F = (grad_x f, -grad_y f), its
Jacobian, the Hessian of f, and stochastic field samplers for two noise
models (additive gradient noise and noise on the coupling matrix entries).

All the heavy entry points have array-first internals (``*_z`` methods take
stacked states of shape (..., 2d)) so Monte Carlo loops can vectorize over
runs; the module-level operations wrap them for a single StateVector.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import DiagMatrix, RngStream, StateVector
from .errors import InvalidDimension, InvalidTag, UnsupportedNoise


class NoiseKind(enum.Enum):
    NONE = "none"
    ADDITIVE_GRADIENT = "additive_gradient"
    MATRIX_ENTRY = "matrix_entry"


@dataclass(frozen=True)
class NoiseSpec:
    """Stochastic-gradient model.

    ADDITIVE_GRADIENT adds independent zero-mean state-independent Gaussians
    (std sigma_i) to grad_x f and grad_y f. MATRIX_ENTRY perturbs the diagonal
    coupling matrix: Lambda_xi = Lambda + diag(xi), xi_i ~ N(0, sigma_i^2);
    it is only defined on the bilinear game (Quadratic with A = 0).
    """

    kind: NoiseKind
    sigma: DiagMatrix

    @classmethod
    def none(cls, d: int = 1) -> "NoiseSpec":
        return cls(NoiseKind.NONE, DiagMatrix.of(0.0, d, psd=True))

    @classmethod
    def additive(cls, sigma, d: int) -> "NoiseSpec":
        return cls(NoiseKind.ADDITIVE_GRADIENT, DiagMatrix.of(sigma, d, psd=True))

    @classmethod
    def matrix_entry(cls, sigma, d: int) -> "NoiseSpec":
        return cls(NoiseKind.MATRIX_ENTRY, DiagMatrix.of(sigma, d, psd=True))


@dataclass(frozen=True)
class SampleTag:
    """Opaque handle for one noise draw, re-applicable at another point.

    For additive noise the payload is the drawn noise vector (U^x, U^y); for
    matrix noise it is xi. This makes "same sample evaluated at two points"
    well-defined, which the extragradient step needs.
    """

    kind: NoiseKind
    payload: np.ndarray
    owner: int  # id() of the landscape that issued the tag


class Landscape:
    """Base class; subclasses implement the vectorized geometry methods."""

    kind = "base"

    def __init__(self, d: int, noise: NoiseSpec | None):
        self.d = d
        self.noise = noise if noise is not None else NoiseSpec.none(d)
        if self.noise.sigma.d != d:
            raise InvalidDimension("noise sigma dimension does not match landscape")
        if self.noise.kind is NoiseKind.MATRIX_ENTRY and not self._supports_matrix_noise():
            raise UnsupportedNoise("matrix-entry noise is only defined on the bilinear game")

    def _supports_matrix_noise(self) -> bool:
        return False

    # -- geometry (subclasses): arrays x, y of shape (..., d) --------------
    def value_xy(self, x, y):
        raise NotImplementedError

    def field_xy(self, x, y):
        """Returns (F_x, F_y) = (grad_x f, -grad_y f), each shaped like x."""
        raise NotImplementedError

    def jacobian_z(self, Z):
        """Jacobian of F, shape (..., 2d, 2d)."""
        raise NotImplementedError

    def hessian_z(self, Z):
        """Hessian of f as a function of (x, y), shape (..., 2d, 2d)."""
        raise NotImplementedError

    # -- generic array-first helpers ---------------------------------------
    def field_z(self, Z):
        Z = np.asarray(Z, dtype=float)
        d = self.d
        fx, fy = self.field_xy(Z[..., :d], Z[..., d:])
        return np.concatenate([fx, fy], axis=-1)

    def hamiltonian_z(self, Z):
        F = self.field_z(Z)
        return 0.5 * np.sum(F * F, axis=-1)

    def grad_hamiltonian_z(self, Z):
        """grad H = (grad F)^T F, shape (..., 2d)."""
        F = self.field_z(Z)
        J = self.jacobian_z(Z)
        return np.einsum("...ji,...j->...i", J, F)

    def draw_tag(self, rng: RngStream) -> SampleTag:
        """One fresh noise draw; the number of normals consumed is fixed per
        noise kind so pre-generated noise blocks can replay it exactly."""
        kind = self.noise.kind
        if kind is NoiseKind.NONE:
            return SampleTag(kind, np.zeros(0), id(self))
        if kind is NoiseKind.ADDITIVE_GRADIENT:
            g = rng.standard_normal(2 * self.d)
            sig = self.noise.sigma.entries
            return SampleTag(kind, np.concatenate([sig, sig]) * g, id(self))
        # matrix entry
        xi = self.noise.sigma.entries * rng.standard_normal(self.d)
        return SampleTag(kind, xi, id(self))

    def tag_from_normals(self, g: np.ndarray) -> SampleTag:
        """Build the tag a draw_tag call would produce from raw normals."""
        kind = self.noise.kind
        if kind is NoiseKind.NONE:
            return SampleTag(kind, np.zeros(0), id(self))
        sig = self.noise.sigma.entries
        if kind is NoiseKind.ADDITIVE_GRADIENT:
            return SampleTag(kind, np.concatenate([sig, sig]) * g, id(self))
        return SampleTag(kind, sig * g, id(self))

    def normals_per_tag(self) -> int:
        kind = self.noise.kind
        if kind is NoiseKind.NONE:
            return 0
        return 2 * self.d if kind is NoiseKind.ADDITIVE_GRADIENT else self.d

    def sample_field_z(self, Z, tag: SampleTag):
        self._check_tag(tag)
        F = self.field_z(Z)
        if tag.kind is NoiseKind.NONE:
            return F
        d = self.d
        if tag.kind is NoiseKind.ADDITIVE_GRADIENT:
            # F_gamma = F + (U^x, -U^y)
            u = np.concatenate([tag.payload[:d], -tag.payload[d:]])
            return F + u
        # matrix entry, bilinear: F_xi = (Lambda_xi y, -Lambda_xi x)
        x, y = Z[..., :d], Z[..., d:]
        return F + np.concatenate([tag.payload * y, -tag.payload * x], axis=-1)

    def sample_jacobian_z(self, Z, tag: SampleTag):
        self._check_tag(tag)
        J = self.jacobian_z(Z)
        if tag.kind is not NoiseKind.MATRIX_ENTRY:
            # state-independent additive noise: grad F_gamma = grad F
            return J
        d = self.d
        J = np.array(J, copy=True)
        idx = np.arange(d)
        J[..., idx, d + idx] += tag.payload
        J[..., d + idx, idx] -= tag.payload
        return J

    def _check_tag(self, tag: SampleTag):
        if not isinstance(tag, SampleTag) or tag.owner != id(self) or tag.kind is not self.noise.kind:
            raise InvalidTag("tag was not produced by sample_field on this landscape")

    def _check_state(self, z: StateVector):
        if z.d != self.d:
            raise InvalidDimension(f"state has d={z.d}, landscape has d={self.d}")


class Quadratic(Landscape):
    """f = x'Ax/2 + x'Lambda y - y'Ay/2 with diagonal A, Lambda.

    A = 0 is the bilinear game x'Lambda y. A may be signed (bad saddles);
    Lambda is required nonnegative.
    """

    kind = "quadratic"

    def __init__(self, a, lam, noise: NoiseSpec | None = None, d: int | None = None):
        if d is None:
            d = max(np.atleast_1d(np.asarray(a)).size, np.atleast_1d(np.asarray(lam)).size)
        self.a = DiagMatrix.of(a, d)
        self.lam = DiagMatrix.of(lam, d, psd=True)
        super().__init__(d, noise)

    def _supports_matrix_noise(self) -> bool:
        return bool(np.all(self.a.entries == 0.0))

    @property
    def is_bilinear(self) -> bool:
        return bool(np.all(self.a.entries == 0.0))

    def value_xy(self, x, y):
        a, lam = self.a.entries, self.lam.entries
        return 0.5 * np.sum(a * x * x, axis=-1) + np.sum(lam * x * y, axis=-1) - 0.5 * np.sum(a * y * y, axis=-1)

    def field_xy(self, x, y):
        a, lam = self.a.entries, self.lam.entries
        return a * x + lam * y, -lam * x + a * y

    def _const_block(self, sign_lower: float) -> np.ndarray:
        d = self.d
        m = np.zeros((2 * d, 2 * d))
        idx = np.arange(d)
        m[idx, idx] = self.a.entries
        m[idx, d + idx] = self.lam.entries
        m[d + idx, idx] = sign_lower * self.lam.entries
        m[d + idx, d + idx] = -sign_lower * self.a.entries
        return m

    def jacobian_z(self, Z):
        # [[A, L], [-L, A]], constant in z
        m = self._const_block(-1.0)
        Z = np.asarray(Z, dtype=float)
        return np.broadcast_to(m, Z.shape[:-1] + m.shape)

    def hessian_z(self, Z):
        # [[A, L], [L, -A]]
        m = self._const_block(1.0)
        Z = np.asarray(Z, dtype=float)
        return np.broadcast_to(m, Z.shape[:-1] + m.shape)


class _SeparableGame(Landscape):
    """f = x (y - c) + phi_a(x) - phi_b(y) in one dimension."""

    def __init__(self, c, phi_a, phi_b, noise: NoiseSpec | None = None):
        self.c = c
        self.phi_a = phi_a  # (phi, dphi, d2phi) triple or None
        self.phi_b = phi_b
        super().__init__(1, noise)

    @staticmethod
    def _eval(phi, z, order):
        if phi is None:
            return np.zeros_like(z)
        return phi[order](z)

    def value_xy(self, x, y):
        v = x[..., 0] * (y[..., 0] - self.c)
        v = v + self._eval(self.phi_a, x[..., 0], 0) - self._eval(self.phi_b, y[..., 0], 0)
        return v

    def field_xy(self, x, y):
        fx = (y[..., 0] - self.c) + self._eval(self.phi_a, x[..., 0], 1)
        fy = -x[..., 0] + self._eval(self.phi_b, y[..., 0], 1)
        return fx[..., None], fy[..., None]

    def jacobian_z(self, Z):
        Z = np.asarray(Z, dtype=float)
        x, y = Z[..., 0], Z[..., 1]
        J = np.zeros(Z.shape[:-1] + (2, 2))
        J[..., 0, 0] = self._eval(self.phi_a, x, 2)
        J[..., 0, 1] = 1.0
        J[..., 1, 0] = -1.0
        J[..., 1, 1] = self._eval(self.phi_b, y, 2)
        return J

    def hessian_z(self, Z):
        Z = np.asarray(Z, dtype=float)
        x, y = Z[..., 0], Z[..., 1]
        H = np.zeros(Z.shape[:-1] + (2, 2))
        H[..., 0, 0] = self._eval(self.phi_a, x, 2)
        H[..., 0, 1] = 1.0
        H[..., 1, 0] = 1.0
        H[..., 1, 1] = -self._eval(self.phi_b, y, 2)
        return H


def _phi146():
    # phi(z) = z^2/4 - z^4/2 + z^6/6
    return (lambda z: z**2 / 4 - z**4 / 2 + z**6 / 6,
            lambda z: z / 2 - 2 * z**3 + z**5,
            lambda z: 0.5 - 6 * z**2 + 5 * z**4)


def _phi24(eps=1.0):
    # phi(z) = eps (z^2/2 - z^4/4)
    return (lambda z: eps * (z**2 / 2 - z**4 / 4),
            lambda z: eps * (z - z**3),
            lambda z: eps * (1 - 3 * z**2))


def _phi2468():
    # phi(z) = z^2/2 - z^4/4 + z^6/6 - z^8/8
    return (lambda z: z**2 / 2 - z**4 / 4 + z**6 / 6 - z**8 / 8,
            lambda z: z - z**3 + z**5 - z**7,
            lambda z: 1 - 3 * z**2 + 5 * z**4 - 7 * z**6)


class NonBilinear1(_SeparableGame):
    """f = x(y - 0.45) + phi(x) - phi(y), phi = z^2/4 - z^4/2 + z^6/6."""

    kind = "nonbilinear1"

    def __init__(self, noise: NoiseSpec | None = None):
        super().__init__(0.45, _phi146(), _phi146(), noise)


class NonBilinear2(_SeparableGame):
    """f = xy - eps phi(y), phi = z^2/2 - z^4/4."""

    kind = "nonbilinear2"

    def __init__(self, noise: NoiseSpec | None = None, eps: float = 0.01):
        self.eps = eps
        super().__init__(0.0, None, _phi24(eps), noise)


class NonBilinear3(_SeparableGame):
    """f = xy + phi(x) - phi(y), phi = z^2/2 - z^4/4 + z^6/6 - z^8/8."""

    kind = "nonbilinear3"

    def __init__(self, noise: NoiseSpec | None = None):
        super().__init__(0.0, _phi2468(), _phi2468(), noise)


# ---------------------------------------------------------------------------
# single-state operations


def value(l: Landscape, z: StateVector) -> float:
    l._check_state(z)
    return float(l.value_xy(z.x, z.y))


def field(l: Landscape, z: StateVector) -> StateVector:
    l._check_state(z)
    return StateVector.from_z(l.field_z(z.z))


def field_jacobian(l: Landscape, z: StateVector) -> np.ndarray:
    l._check_state(z)
    return np.array(l.jacobian_z(z.z))


def hessian(l: Landscape, z: StateVector) -> np.ndarray:
    l._check_state(z)
    return np.array(l.hessian_z(z.z))


def sample_field(l: Landscape, z: StateVector, rng: RngStream) -> tuple[StateVector, SampleTag]:
    l._check_state(z)
    tag = l.draw_tag(rng)
    return StateVector.from_z(l.sample_field_z(z.z, tag)), tag


def sample_field_jacobian(l: Landscape, z: StateVector, tag: SampleTag) -> np.ndarray:
    l._check_state(z)
    return np.array(l.sample_jacobian_z(z.z, tag))


def hamiltonian(l: Landscape, z: StateVector) -> float:
    l._check_state(z)
    return float(l.hamiltonian_z(z.z))
