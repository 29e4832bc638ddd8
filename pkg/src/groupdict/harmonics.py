"""Irreducible representations and band-limited Fourier analysis on SO(2), O(2), SO(3).

Conventions
-----------
* Haar measure is normalized to total mass one.
* Fourier coefficient: ``f_hat[xi] = int f(g) rho_xi(g)^* dmu(g)``.
* Synthesis: ``f(g) = sum_xi dim(xi) tr(f_hat[xi] rho_xi(g))``.
* The left-regular action ``[tau(g) f](x) = f(g^{-1} x)`` right-multiplies
  every block by ``rho_xi(g)^*``.

SO(3) elements are Euler triples with ``R = Z(alpha) Y(beta) Z(gamma)``,
where ``Z(t) = [[cos t, sin t, 0], [-sin t, cos t, 0], [0, 0, 1]]`` and
``Y(t) = [[cos t, 0, sin t], [0, 1, 0], [-sin t, 0, cos t]]``.  Wigner
matrices are ``D_{m,m'} = exp(-i m alpha) d_{m',m}(beta) exp(-i m' gamma)``
with rows and columns ordered ``m = -j..j``.

O(2) elements are ``(theta, reflection)``.  Rotations map to ``R(theta)``
above; reflections map to ``L(-theta)`` so that
``rho_k = [[0, e^{ik theta}], [e^{-ik theta}, 0]]`` is a homomorphism.
Only the trivial one-dimensional irrep is used at ``k = 0``.
"""

from __future__ import annotations

import decimal
import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "Group",
    "GroupElement",
    "IrrepIndex",
    "IrrepTable",
    "FourierCoefficients",
    "BlockDiagOperator",
    "QuadratureGrid",
    "GridTooCoarseError",
    "enumerate_irreps",
    "wigner_little_d",
    "wigner_d_matrix",
    "wigner_D_matrix",
    "irrep_matrix",
    "quadrature_grid",
    "fourier_transform",
    "synthesize",
    "synthesize_many",
    "synthesize_grid",
    "plancherel_norm",
    "act_left_regular",
    "apply_operator",
    "conjugation_matrix",
]


class Group(str, enum.Enum):
    SO2 = "SO2"
    O2 = "O2"
    SO3 = "SO3"


class GridTooCoarseError(ValueError):
    """Quadrature grid cannot integrate the requested bandwidth exactly."""


# ---------------------------------------------------------------------------
# group elements


def _rot_z(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def euler_to_matrix(alpha, beta, gamma) -> np.ndarray:
    """Rotation matrix ``Z(alpha) Y(beta) Z(gamma)``; vectorized over inputs."""
    a, b, g = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, gamma)))
    ca, sa, cb, sb, cg, sg = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(g), np.sin(g)
    out = np.empty(a.shape + (3, 3))
    # Z(a) Y(b)
    zy = np.empty(a.shape + (3, 3))
    zy[..., 0, 0] = ca * cb
    zy[..., 0, 1] = sa
    zy[..., 0, 2] = ca * sb
    zy[..., 1, 0] = -sa * cb
    zy[..., 1, 1] = ca
    zy[..., 1, 2] = -sa * sb
    zy[..., 2, 0] = -sb
    zy[..., 2, 1] = 0.0
    zy[..., 2, 2] = cb
    # right-multiply by Z(g)
    out[..., :, 0] = zy[..., :, 0] * cg[..., None] - zy[..., :, 1] * sg[..., None]
    out[..., :, 1] = zy[..., :, 0] * sg[..., None] + zy[..., :, 1] * cg[..., None]
    out[..., :, 2] = zy[..., :, 2]
    return out


def matrix_to_euler(R, tol: float = 1e-12):
    """Invert :func:`euler_to_matrix`; vectorized over leading axes.

    At gimbal lock (``beta`` at 0 or pi) gamma is set to 0 and the whole
    rotation about z is carried by alpha.
    """
    R = np.asarray(R, dtype=float)
    beta = np.arccos(np.clip(R[..., 2, 2], -1.0, 1.0))
    sb = np.sqrt(R[..., 0, 2] ** 2 + R[..., 1, 2] ** 2)
    regular = sb > tol
    alpha = np.where(regular, np.arctan2(-R[..., 1, 2], R[..., 0, 2]), 0.0)
    gamma = np.where(regular, np.arctan2(-R[..., 2, 1], -R[..., 2, 0]), 0.0)
    north = (~regular) & (R[..., 2, 2] > 0)
    south = (~regular) & (R[..., 2, 2] <= 0)
    alpha = np.where(north, np.arctan2(R[..., 0, 1], R[..., 0, 0]), alpha)
    alpha = np.where(south, np.arctan2(R[..., 0, 1], -R[..., 0, 0]), alpha)
    beta = np.where(north, 0.0, np.where(south, math.pi, beta))
    return np.mod(alpha, TWO_PI), beta, np.mod(gamma, TWO_PI)


@dataclass(frozen=True)
class GroupElement:
    """An element of SO(2), O(2) or SO(3) with angles in canonical ranges."""

    group: Group
    angles: tuple
    reflection: bool = False

    def __post_init__(self):
        group = Group(self.group)
        object.__setattr__(self, "group", group)
        angles = tuple(float(a) for a in self.angles)
        if group is Group.SO3:
            if len(angles) != 3:
                raise ValueError("SO3 elements need three Euler angles")
            a, b, g = angles
            b = b % TWO_PI
            if b > math.pi:
                a, b, g = a + math.pi, TWO_PI - b, g + math.pi
            angles = (a % TWO_PI, b, g % TWO_PI)
            if self.reflection:
                raise ValueError("SO3 elements carry no reflection flag")
        else:
            if len(angles) != 1:
                raise ValueError(f"{group.value} elements need one angle")
            angles = (angles[0] % TWO_PI,)
            if group is Group.SO2 and self.reflection:
                raise ValueError("SO2 elements carry no reflection flag")
        object.__setattr__(self, "angles", angles)

    # constructors ---------------------------------------------------------
    @classmethod
    def so2(cls, theta):
        return cls(Group.SO2, (theta,))

    @classmethod
    def o2(cls, theta, reflection=False):
        return cls(Group.O2, (theta,), bool(reflection))

    @classmethod
    def so3(cls, alpha, beta, gamma):
        return cls(Group.SO3, (alpha, beta, gamma))

    @classmethod
    def identity(cls, group):
        group = Group(group)
        return cls(group, (0.0, 0.0, 0.0) if group is Group.SO3 else (0.0,))

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        if M.shape == (3, 3):
            return cls.so3(*(float(v) for v in matrix_to_euler(M)))
        if M.shape == (2, 2):
            det = np.linalg.det(M)
            if det > 0:
                return cls.o2(math.atan2(M[0, 1], M[0, 0]))
            # L(-theta) = [[cos, -sin], [-sin, -cos]]
            return cls.o2(math.atan2(-M[0, 1], M[0, 0]), True)
        raise ValueError("expected a 2x2 or 3x3 orthogonal matrix")

    @classmethod
    def random(cls, group, rng=None):
        """Haar-distributed element."""
        rng = np.random.default_rng(rng)
        group = Group(group)
        if group is Group.SO3:
            a, g = rng.uniform(0.0, TWO_PI, 2)
            b = math.acos(rng.uniform(-1.0, 1.0))
            return cls.so3(a, b, g)
        theta = rng.uniform(0.0, TWO_PI)
        if group is Group.SO2:
            return cls.so2(theta)
        return cls.o2(theta, bool(rng.integers(2)))

    # algebra --------------------------------------------------------------
    def matrix(self) -> np.ndarray:
        if self.group is Group.SO3:
            return euler_to_matrix(*self.angles)
        (t,) = self.angles
        c, s = math.cos(t), math.sin(t)
        if self.reflection:
            return np.array([[c, -s], [-s, -c]])
        return np.array([[c, s], [-s, c]])

    def compose(self, other: "GroupElement") -> "GroupElement":
        """Group product ``self * other``."""
        if other.group is not self.group:
            raise ValueError("cannot compose elements of different groups")
        if self.group is Group.SO3:
            return GroupElement.from_matrix(self.matrix() @ other.matrix())
        (a,), (b,) = self.angles, other.angles
        if self.group is Group.SO2:
            return GroupElement.so2(a + b)
        if not self.reflection:
            return GroupElement.o2(a + b, other.reflection)
        return GroupElement.o2(a - b, not other.reflection)

    __mul__ = compose

    def inverse(self) -> "GroupElement":
        if self.group is Group.SO3:
            return GroupElement.from_matrix(self.matrix().T)
        if self.group is Group.O2 and self.reflection:
            return self
        return GroupElement(self.group, (-self.angles[0],), self.reflection)

    def act(self, point):
        """Action on R^2 / R^3 points by matrix multiplication (SO3, O2) or angle shift (SO2)."""
        if self.group is Group.SO2:
            return (np.asarray(point) + self.angles[0]) % TWO_PI
        return self.matrix() @ np.asarray(point, dtype=float)


# ---------------------------------------------------------------------------
# irreps


@dataclass(frozen=True)
class IrrepIndex:
    group: Group
    label: int

    @property
    def dim(self) -> int:
        if self.group is Group.SO2:
            return 1
        if self.group is Group.O2:
            return 1 if self.label == 0 else 2
        return 2 * self.label + 1


@dataclass(frozen=True)
class IrrepTable:
    group: Group
    bandwidth: int
    entries: tuple

    @property
    def labels(self) -> list:
        return [e.label for e in self.entries]

    @property
    def dims(self) -> list:
        return [e.dim for e in self.entries]

    @property
    def total_dim(self) -> int:
        """Number of complex coefficients, ``sum dim^2``."""
        return sum(d * d for d in self.dims)

    @classmethod
    def from_labels(cls, group, labels) -> "IrrepTable":
        """Table holding only the given labels, in the order given."""
        group = Group(group)
        labels = [int(k) for k in labels]
        if not labels or len(set(labels)) != len(labels):
            raise ValueError("labels must be nonempty and distinct")
        if group is not Group.SO2 and min(labels) < 0:
            raise ValueError("labels must be nonnegative")
        N = max(abs(k) for k in labels)
        return cls(group, N, tuple(IrrepIndex(group, k) for k in labels))

    def position(self, label: int) -> int:
        for k, e in enumerate(self.entries):
            if e.label == label:
                return k
        raise KeyError(label)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def enumerate_irreps(group, N: int) -> IrrepTable:
    """Irreps of bandwidth ``N``: SO2 labels -N..N, O2 and SO3 labels 0..N."""
    group = Group(group)
    if N < 0:
        raise ValueError("bandwidth must be nonnegative")
    labels = range(-N, N + 1) if group is Group.SO2 else range(N + 1)
    return IrrepTable(group, N, tuple(IrrepIndex(group, k) for k in labels))


# Wigner small-d ------------------------------------------------------------

_LOG_FACT = np.array([math.lgamma(k + 1) for k in range(256)])


@lru_cache(maxsize=None)
def _wigner_terms(j: int):
    """Per-term data of the closed-form sum for all (m', m) pairs of degree j.

    Coefficients are formed from exact integer factorials and rounded once
    to extended precision, so cancellation in the sum is the only error.
    Returns arrays (row, col, coef, cos_pow, sin_pow) with row = m' + j,
    col = m + j, sorted by (row, col).
    """
    fact = math.factorial
    rows, cols, coefs, pc, ps = [], [], [], [], []
    with decimal.localcontext() as ctx:
        ctx.prec = 40
        for mp in range(-j, j + 1):
            for m in range(-j, j + 1):
                root = decimal.Decimal(fact(j + m) * fact(j - m) * fact(j + mp) * fact(j - mp)).sqrt()
                for k in range(max(0, m - mp), min(j + m, j - mp) + 1):
                    den = fact(j + m - k) * fact(j - k - mp) * fact(k - m + mp) * fact(k)
                    val = root / den
                    if (k - m + mp) % 2:
                        val = -val
                    rows.append(mp + j)
                    cols.append(m + j)
                    coefs.append(np.longdouble(str(val)))
                    pc.append(2 * j - 2 * k + m - mp)
                    ps.append(2 * k - m + mp)
    return (
        np.asarray(rows),
        np.asarray(cols),
        np.asarray(coefs, dtype=np.longdouble),
        np.asarray(pc),
        np.asarray(ps),
    )


def wigner_little_d(j: int, mp: int, m: int, beta: float) -> float:
    """Single entry ``d^{(j)}_{m', m}(beta)`` from the closed-form sum."""
    if abs(m) > j or abs(mp) > j:
        raise ValueError("|m|, |m'| must not exceed j")
    c = math.cos(beta / 2.0)
    s = math.sin(beta / 2.0)
    terms = []
    half = 0.5 * (_LOG_FACT[j + m] + _LOG_FACT[j - m] + _LOG_FACT[j + mp] + _LOG_FACT[j - mp])
    for k in range(max(0, m - mp), min(j + m, j - mp) + 1):
        logc = (
            half
            - _LOG_FACT[j + m - k]
            - _LOG_FACT[j - k - mp]
            - _LOG_FACT[k - m + mp]
            - _LOG_FACT[k]
        )
        sign = -1.0 if (k - m + mp) % 2 else 1.0
        terms.append(sign * math.exp(logc) * c ** (2 * j - 2 * k + m - mp) * s ** (2 * k - m + mp))
    return math.fsum(terms)


def _wigner_d_direct(j: int, beta) -> np.ndarray:
    """Closed-form sum in extended precision; slow, used to seed the Fourier table."""
    b = np.asarray(beta, dtype=float).reshape(-1).astype(np.longdouble)
    rows, cols, coef, pc, ps = _wigner_terms(j)
    c = np.cos(b / 2)[:, None]
    s = np.sin(b / 2)[:, None]
    vals = coef[None, :] * c ** pc[None, :] * s ** ps[None, :]
    n = 2 * j + 1
    # terms are generated grouped by (row, col) in row-major order
    starts = np.flatnonzero(np.r_[True, np.diff(rows * n + cols) != 0])
    return np.add.reduceat(vals, starts, axis=1).astype(float).reshape(-1, n, n)


@lru_cache(maxsize=None)
def _wigner_d_fourier(j: int) -> np.ndarray:
    """Coefficients ``A[k + j]`` with ``d^{(j)}(beta) = sum_k A_k e^{i k beta}``."""
    K = 2 * j + 1
    vals = _wigner_d_direct(j, TWO_PI * np.arange(K) / K)
    A = np.fft.fft(vals, axis=0) / K
    A = np.roll(A, j, axis=0)  # index k + j
    A.setflags(write=False)
    return A


def wigner_d_matrix(j: int, beta) -> np.ndarray:
    """Matrix ``d[m'+j, m+j] = d^{(j)}_{m',m}(beta)``; vectorized over ``beta``.

    Each entry is a trigonometric polynomial of degree ``j`` in ``beta``;
    its coefficients are computed once from the exact closed form.
    """
    beta = np.asarray(beta, dtype=float)
    shape = beta.shape
    n = 2 * j + 1
    A = _wigner_d_fourier(j).reshape(n, n * n)
    E = np.exp(1j * np.outer(beta.reshape(-1), np.arange(-j, j + 1)))
    return (E @ A).real.reshape(shape + (n, n))


def wigner_D_matrix(j: int, alpha, beta, gamma) -> np.ndarray:
    """Wigner matrix ``D^{(j)}(alpha, beta, gamma)``; vectorized over broadcast angles."""
    a, b, g = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, gamma)))
    m = np.arange(-j, j + 1)
    d = wigner_d_matrix(j, b)
    dt = np.swapaxes(d, -1, -2)  # dt[m, m'] = d_{m', m}
    ea = np.exp(-1j * a[..., None] * m)
    eg = np.exp(-1j * g[..., None] * m)
    return ea[..., :, None] * dt * eg[..., None, :]


def irrep_matrix(xi: IrrepIndex, g: GroupElement) -> np.ndarray:
    if xi.group is not g.group:
        raise ValueError("irrep and element belong to different groups")
    if g.group is Group.SO2:
        return np.array([[np.exp(1j * xi.label * g.angles[0])]])
    if g.group is Group.O2:
        k = xi.label
        if k == 0:
            return np.ones((1, 1), dtype=complex)
        e = np.exp(1j * k * g.angles[0])
        if g.reflection:
            return np.array([[0.0, e], [np.conj(e), 0.0]])
        return np.array([[e, 0.0], [0.0, np.conj(e)]])
    return wigner_D_matrix(xi.label, *g.angles)


def conjugation_matrix(xi: IrrepIndex) -> np.ndarray:
    """Real unitary ``C`` with ``conj(rho(g)) = C rho(g) C^T`` for all g.

    Coefficients of a real function then obey ``conj(X) = C X C^T``.
    """
    d = xi.dim
    if xi.group is Group.SO2:
        return np.ones((1, 1))
    if xi.group is Group.O2:
        return np.ones((1, 1)) if d == 1 else np.array([[0.0, 1.0], [1.0, 0.0]])
    j = xi.label
    C = np.zeros((d, d))
    for m in range(-j, j + 1):
        C[m + j, -m + j] = (-1.0) ** m
    return C


# ---------------------------------------------------------------------------
# block-matrix containers


class _BlockFamily:
    """Immutable map from the irreps of a table to complex dim x dim blocks."""

    __slots__ = ("table", "blocks")

    def __init__(self, table: IrrepTable, blocks: Sequence[np.ndarray]):
        blocks = tuple(np.array(b, dtype=complex) for b in blocks)
        if len(blocks) != len(table.entries):
            raise ValueError("one block per irrep is required")
        for xi, b in zip(table.entries, blocks):
            if b.shape != (xi.dim, xi.dim):
                raise ValueError(f"block for {xi.label} has shape {b.shape}, expected {(xi.dim, xi.dim)}")
            b.setflags(write=False)
        self.table = table
        self.blocks = blocks

    @classmethod
    def zeros(cls, table):
        return cls(table, [np.zeros((d, d), complex) for d in table.dims])

    @classmethod
    def identity(cls, table):
        return cls(table, [np.eye(d, dtype=complex) for d in table.dims])

    @classmethod
    def from_element(cls, table, g: GroupElement):
        return cls(table, [irrep_matrix(xi, g) for xi in table.entries])

    @classmethod
    def random(cls, table, rng=None):
        """Independent standard complex Gaussian entries."""
        rng = np.random.default_rng(rng)
        return cls(
            table,
            [(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2) for d in table.dims],
        )

    @classmethod
    def from_vector(cls, table, vec):
        vec = np.asarray(vec, dtype=complex)
        blocks, pos = [], 0
        for d in table.dims:
            blocks.append(vec[pos : pos + d * d].reshape(d, d))
            pos += d * d
        return cls(table, blocks)

    def vector(self) -> np.ndarray:
        """Concatenation of the row-major flattened blocks."""
        return np.concatenate([b.ravel() for b in self.blocks])

    def block(self, label: int) -> np.ndarray:
        return self.blocks[self.table.position(label)]

    def __getitem__(self, label):
        return self.block(label)

    def _check(self, other):
        if self.table != other.table:
            raise ValueError("tables differ")

    def __add__(self, other):
        self._check(other)
        return type(self)(self.table, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.table, [a - b for a, b in zip(self.blocks, other.blocks)])

    def __mul__(self, scalar):
        return type(self)(self.table, [scalar * a for a in self.blocks])

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def map_blocks(self, fn: Callable[[IrrepIndex, np.ndarray], np.ndarray]):
        return type(self)(self.table, [fn(xi, b) for xi, b in zip(self.table.entries, self.blocks)])

    def allclose(self, other, atol=1e-10) -> bool:
        self._check(other)
        return all(np.allclose(a, b, atol=atol, rtol=0) for a, b in zip(self.blocks, other.blocks))

    def max_abs_diff(self, other) -> float:
        self._check(other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.blocks, other.blocks))

    def __repr__(self):
        return f"{type(self).__name__}({self.table.group.value}, N={self.table.bandwidth})"


class FourierCoefficients(_BlockFamily):
    """Fourier coefficients of a band-limited function on the group."""

    def inner(self, other) -> complex:
        """L2 inner product ``sum dim tr(A B^*)``."""
        self._check(other)
        return complex(
            sum(d * np.vdot(b, a) for d, a, b in zip(self.table.dims, self.blocks, other.blocks))
        )

    def real_vector(self) -> np.ndarray:
        """Real vector whose Euclidean norm equals the Plancherel norm."""
        v = np.concatenate([math.sqrt(d) * b.ravel() for d, b in zip(self.table.dims, self.blocks)])
        return np.concatenate([v.real, v.imag])

    @classmethod
    def from_real_vector(cls, table, vec):
        vec = np.asarray(vec, dtype=float)
        half = vec.size // 2
        z = vec[:half] + 1j * vec[half:]
        blocks, pos = [], 0
        for d in table.dims:
            blocks.append(z[pos : pos + d * d].reshape(d, d) / math.sqrt(d))
            pos += d * d
        return cls(table, blocks)


class BlockDiagOperator(_BlockFamily):
    """Block-diagonal operator acting on coefficients by ``X -> X l^*`` per irrep."""


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureGrid:
    """Product quadrature rule for normalized Haar measure.

    SO2: ``thetas`` uniform, samples shape ``(K,)``.
    O2: ``thetas`` uniform on both branches, samples shape ``(2, K)`` with
    axis 0 = (rotation, reflection).
    SO3: samples shape ``(n_alpha, n_beta, n_gamma)``; beta nodes are
    Gauss-Legendre in ``cos(beta)``.
    """

    group: Group
    thetas: np.ndarray = None
    alphas: np.ndarray = None
    betas: np.ndarray = None
    gammas: np.ndarray = None
    beta_weights: np.ndarray = None

    @property
    def shape(self):
        if self.group is Group.SO2:
            return (self.thetas.size,)
        if self.group is Group.O2:
            return (2, self.thetas.size)
        return (self.alphas.size, self.betas.size, self.gammas.size)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def max_bandwidth(self) -> int:
        """Largest N integrated exactly by the transform."""
        if self.group is not Group.SO3:
            return (self.thetas.size - 1) // 2
        return min((self.alphas.size - 1) // 2, (self.gammas.size - 1) // 2, self.betas.size - 1)

    def weights(self) -> np.ndarray:
        if self.group is Group.SO2:
            return np.full(self.shape, 1.0 / self.thetas.size)
        if self.group is Group.O2:
            return np.full(self.shape, 0.5 / self.thetas.size)
        wa = 1.0 / (self.alphas.size * self.gammas.size)
        return wa * np.broadcast_to(self.beta_weights[None, :, None], self.shape).copy()

    def euler_mesh(self):
        return np.meshgrid(self.alphas, self.betas, self.gammas, indexing="ij")

    def rotation_matrices(self) -> np.ndarray:
        return euler_to_matrix(*self.euler_mesh())

    def elements(self) -> list:
        if self.group is Group.SO2:
            return [GroupElement.so2(t) for t in self.thetas]
        if self.group is Group.O2:
            return [GroupElement.o2(t, r) for r in (False, True) for t in self.thetas]
        a, b, g = self.euler_mesh()
        return [GroupElement.so3(*v) for v in zip(a.ravel(), b.ravel(), g.ravel())]

    def tabulate(self, fn: Callable[[GroupElement], float]) -> np.ndarray:
        vals = np.array([fn(g) for g in self.elements()])
        return vals.reshape(self.shape)


def quadrature_grid(group, N: int, oversample: int = 1, even: bool = False) -> QuadratureGrid:
    """Smallest exact grid for bandwidth ``N``, optionally oversampled.

    ``even`` forces an even number of alpha/gamma nodes; such grids are
    invariant under the right action of the half-turn about the x axis.
    """
    group = Group(group)
    if group is not Group.SO3:
        K = oversample * (2 * N + 1)
        return QuadratureGrid(group, thetas=TWO_PI * np.arange(K) / K)
    na = oversample * (2 * N + 1)
    if even and na % 2:
        na += 1
    nb = oversample * (N + 1)
    x, w = np.polynomial.legendre.leggauss(nb)
    betas = np.arccos(x)[::-1]
    return QuadratureGrid(
        group,
        alphas=TWO_PI * np.arange(na) / na,
        betas=betas,
        gammas=TWO_PI * np.arange(na) / na,
        beta_weights=0.5 * w[::-1],
    )


def so3_grid(n_alpha: int, n_beta: int, n_gamma: int) -> QuadratureGrid:
    x, w = np.polynomial.legendre.leggauss(n_beta)
    return QuadratureGrid(
        Group.SO3,
        alphas=TWO_PI * np.arange(n_alpha) / n_alpha,
        betas=np.arccos(x)[::-1],
        gammas=TWO_PI * np.arange(n_gamma) / n_gamma,
        beta_weights=0.5 * w[::-1],
    )


def _check_grid(grid: QuadratureGrid, table: IrrepTable):
    if grid.group is not table.group:
        raise ValueError("grid and table belong to different groups")
    if grid.max_bandwidth() < table.bandwidth:
        raise GridTooCoarseError(
            f"grid resolves bandwidth {grid.max_bandwidth()} < requested {table.bandwidth}"
        )


def fourier_transform(samples, grid: QuadratureGrid, table: IrrepTable) -> FourierCoefficients:
    """Coefficients ``int f rho^* dmu`` by quadrature on ``grid``."""
    _check_grid(grid, table)
    f = np.asarray(samples)
    if f.shape != grid.shape:
        raise ValueError(f"samples shape {f.shape} does not match grid {grid.shape}")
    group = table.group
    if group is Group.SO2:
        K = grid.thetas.size
        blocks = [np.array([[np.sum(f * np.exp(-1j * xi.label * grid.thetas)) / K]]) for xi in table]
        return FourierCoefficients(table, blocks)
    if group is Group.O2:
        K = grid.thetas.size
        w = 0.5 / K
        blocks = []
        for xi in table:
            k = xi.label
            if k == 0:
                blocks.append(np.array([[w * np.sum(f)]]))
                continue
            e = np.exp(1j * k * grid.thetas)
            rot, ref = f[0], f[1]
            # rho^* of rotation: diag(conj e, e); of reflection: [[0, e], [conj e, 0]]
            B = np.zeros((2, 2), complex)
            B[0, 0] = w * np.sum(rot * np.conj(e))
            B[1, 1] = w * np.sum(rot * e)
            B[0, 1] = w * np.sum(ref * e)
            B[1, 0] = w * np.sum(ref * np.conj(e))
            blocks.append(B)
        return FourierCoefficients(table, blocks)

    N = table.bandwidth
    m = np.arange(-N, N + 1)
    na, ng = grid.alphas.size, grid.gammas.size
    Ea = np.exp(1j * np.outer(m, grid.alphas))  # e^{i m alpha}
    Eg = np.exp(1j * np.outer(m, grid.gammas))
    # F[p, b, q] = sum_{a, g} f e^{i p a} e^{i q g} / (na ng)
    F = np.einsum("pa,abg,qg->pbq", Ea, f, Eg, optimize=True) / (na * ng)
    F *= grid.beta_weights[None, :, None]
    blocks = []
    for xi in table:
        j = xi.label
        d = wigner_d_matrix(j, grid.betas)  # d[b, m, m'] = d_{m, m'}(beta_b)
        sl = slice(N - j, N + j + 1)
        # conj(D_{m', m}) = e^{i m' alpha} d_{m, m'}(beta) e^{i m gamma}
        blocks.append(np.einsum("pbm,bmp->mp", F[sl, :, sl], d))
    return FourierCoefficients(table, blocks)


def synthesize(coeffs: FourierCoefficients, g: GroupElement) -> complex:
    """Value of the band-limited function at ``g``."""
    if g.group is not coeffs.table.group:
        raise ValueError("element and coefficients belong to different groups")
    return complex(
        sum(xi.dim * np.trace(b @ irrep_matrix(xi, g)) for xi, b in zip(coeffs.table, coeffs.blocks))
    )


def synthesize_many(coeffs: FourierCoefficients, alpha, beta=None, gamma=None, reflection=None) -> np.ndarray:
    """Vectorized synthesis at many elements given by angle arrays."""
    table = coeffs.table
    if table.group is Group.SO2:
        t = np.asarray(alpha, dtype=float)
        out = np.zeros(t.shape, complex)
        for xi, b in zip(table, coeffs.blocks):
            out += b[0, 0] * np.exp(1j * xi.label * t)
        return out
    if table.group is Group.O2:
        t = np.asarray(alpha, dtype=float)
        refl = np.zeros(t.shape, bool) if reflection is None else np.asarray(reflection, bool)
        out = np.zeros(t.shape, complex)
        for xi, b in zip(table, coeffs.blocks):
            if xi.label == 0:
                out += b[0, 0]
                continue
            e = np.exp(1j * xi.label * t)
            rot = b[0, 0] * e + b[1, 1] * np.conj(e)
            ref = b[1, 0] * e + b[0, 1] * np.conj(e)
            out += 2 * np.where(refl, ref, rot)
        return out
    a, bt, g = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, beta, gamma)))
    shape = a.shape
    a, bt, g = a.ravel(), bt.ravel(), g.ravel()
    out = np.zeros(a.size, complex)
    for xi, blk in zip(table, coeffs.blocks):
        j = xi.label
        mm = np.arange(-j, j + 1)
        d = wigner_d_matrix(j, bt)  # (n, m', m)
        ea = np.exp(-1j * np.outer(a, mm))  # (n, m)
        eg = np.exp(-1j * np.outer(g, mm))  # (n, m')
        # tr(X D) = sum_{m, m'} X[m', m] e^{-i m a} d[m', m] e^{-i m' g}
        out += xi.dim * np.einsum("nm,npm,np,pm->n", ea, d, eg, blk, optimize=True)
    return out.reshape(shape)


def synthesize_grid(coeffs: FourierCoefficients, grid: QuadratureGrid) -> np.ndarray:
    """Values on every node of ``grid`` (shape ``grid.shape``)."""
    table = coeffs.table
    if table.group is Group.SO2:
        return synthesize_many(coeffs, grid.thetas)
    if table.group is Group.O2:
        t = np.stack([grid.thetas, grid.thetas])
        r = np.stack([np.zeros_like(grid.thetas, bool), np.ones_like(grid.thetas, bool)])
        return synthesize_many(coeffs, t, reflection=r)
    N = table.bandwidth
    m = np.arange(-N, N + 1)
    G = np.zeros((2 * N + 1, grid.betas.size, 2 * N + 1), complex)
    for xi, blk in zip(table, coeffs.blocks):
        j = xi.label
        d = wigner_d_matrix(j, grid.betas)  # (b, m', m)
        sl = slice(N - j, N + j + 1)
        # G[m, b, m'] += dim X[m', m] d[b, m', m]
        G[sl, :, sl] += xi.dim * np.einsum("pm,bpm->mbp", blk, d)
    Ea = np.exp(-1j * np.outer(grid.alphas, m))
    Eg = np.exp(-1j * np.outer(grid.gammas, m))
    return np.einsum("am,mbp,gp->abg", Ea, G, Eg, optimize=True)


def plancherel_norm(coeffs: _BlockFamily) -> float:
    """``sqrt(sum dim ||X||_F^2)``, the L2 norm of the function."""
    return math.sqrt(sum(d * float(np.sum(np.abs(b) ** 2)) for d, b in zip(coeffs.table.dims, coeffs.blocks)))


def act_left_regular(coeffs: FourierCoefficients, g: GroupElement) -> FourierCoefficients:
    """Coefficients of ``x -> f(g^{-1} x)``."""
    if g.group is not coeffs.table.group:
        raise ValueError("element and coefficients belong to different groups")
    return coeffs.map_blocks(lambda xi, b: b @ irrep_matrix(xi, g).conj().T)


def apply_operator(coeffs: FourierCoefficients, op: BlockDiagOperator) -> FourierCoefficients:
    """Blockwise ``X -> X l^*``."""
    if coeffs.table != op.table:
        raise ValueError("operator and coefficients use different irrep tables")
    return FourierCoefficients(coeffs.table, [b @ l.conj().T for b, l in zip(coeffs.blocks, op.blocks)])
