"""Orbitopes of SO(2), O(2) and SO(3) and the semidefinite programs built on them.

The Caratheodory orbitope ``C_j = conv{v(theta)}`` with
``v(theta) = (1, e^{i theta}, ..., e^{i j theta})`` is the set of first
columns of PSD Hermitian Toeplitz matrices.  Its multilevel analogue
(PSD matrices whose entries depend only on the index difference in every
mode) is an outer approximation of the convex hull of tensor products
``v(a) (x) v(b) (x) v(c)``; together with the linear maps ``L^(j)`` that
read Wigner matrices off such tensors it relaxes the SO(3) atomic norm.

All builders here write into a :class:`~groupdict.conic.ConicProblem`.
Toeplitz ties are encoded by sharing variables: a multilevel Toeplitz
matrix is parametrized by its entries ``z[d]`` for offsets ``d`` in a
half-space, with ``z[-d] = conj(z[d])`` and ``z[0]`` real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp

from .conic import ConicProblem, solve
from .harmonics import (
    BlockDiagOperator,
    Group,
    IrrepTable,
    enumerate_irreps,
    wigner_D_matrix,
    wigner_d_matrix,
)

__all__ = [
    "HermitianToeplitz",
    "TrigMomentVector",
    "BlockToeplitzTensor",
    "WignerIndexMap",
    "ToeplitzVariables",
    "GaugeVariables",
    "VandermondeError",
    "caratheodory_vector",
    "real_embedding",
    "is_block_toeplitz",
    "vandermonde_decompose",
    "build_wigner_index_maps",
    "add_so2_gauge",
    "add_o2_gauge",
    "add_so3_gauge",
    "minkowski_so2",
    "minkowski_o2",
    "tensor_minkowski_relaxed",
    "so3_operator_norm_relaxed",
    "gauge_value",
]

TWO_PI = 2.0 * math.pi


class VandermondeError(ValueError):
    """A Toeplitz matrix could not be decomposed within tolerance."""


def caratheodory_vector(theta, j: int) -> np.ndarray:
    """``v^(j)(theta) = (e^{i k theta})_{k=0..j}``."""
    return np.exp(1j * np.arange(j + 1) * theta)


def real_embedding(H, tol: float = 1e-10) -> np.ndarray:
    """Real symmetric ``[[A, B^T], [B, A]]`` for Hermitian ``H = A + iB``."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol:
        raise ValueError("matrix is not Hermitian")
    A, B = H.real, H.imag
    return np.block([[A, B.T], [B, A]])


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class HermitianToeplitz:
    """Hermitian Toeplitz matrix ``T[a, b] = t[a - b]`` stored by its first column."""

    column: np.ndarray

    def __post_init__(self):
        col = np.array(self.column, dtype=complex).ravel()
        if col.size == 0:
            raise ValueError("empty Toeplitz column")
        col[0] = col[0].real
        col.setflags(write=False)
        object.__setattr__(self, "column", col)

    @property
    def size(self) -> int:
        return self.column.size

    def matrix(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self.column, self.column.conj())

    @classmethod
    def from_matrix(cls, M) -> "HermitianToeplitz":
        """Project onto Hermitian Toeplitz structure by averaging diagonals."""
        M = np.asarray(M, dtype=complex)
        M = 0.5 * (M + M.conj().T)
        n = M.shape[0]
        return cls(np.array([np.mean(np.diagonal(M, -k)) for k in range(n)]))

    @classmethod
    def from_atoms(cls, thetas, weights, n: int) -> "HermitianToeplitz":
        k = np.arange(n)
        col = np.exp(1j * np.outer(k, np.atleast_1d(thetas))) @ np.atleast_1d(np.asarray(weights, float))
        return cls(col)


@dataclass(frozen=True)
class TrigMomentVector:
    """Folded moments ``x_0..x_j`` of a conjugate-symmetric vector ``x_{-j}..x_j``."""

    folded: np.ndarray

    def __post_init__(self):
        v = np.array(self.folded, dtype=complex).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "folded", v)

    @property
    def order(self) -> int:
        return self.folded.size - 1

    @classmethod
    def from_full(cls, full, tol: float = 1e-9) -> "TrigMomentVector":
        full = np.asarray(full, dtype=complex).ravel()
        if full.size % 2 == 0:
            raise ValueError("full moment vector must have odd length 2j+1")
        j = full.size // 2
        if np.max(np.abs(full[:j][::-1] - full[j + 1 :].conj()), initial=0.0) > tol:
            raise ValueError("entries at -m and m are not conjugate")
        return cls(full[j:])

    def full(self) -> np.ndarray:
        f = self.folded
        return np.concatenate([f[1:][::-1].conj(), f])


def _offset_sign(grid: np.ndarray) -> np.ndarray:
    """Sign of the first nonzero coordinate of each row (0 for the zero row)."""
    out = np.zeros(len(grid), dtype=int)
    undecided = np.ones(len(grid), dtype=bool)
    for k in range(grid.shape[1]):
        col = grid[:, k]
        hit = undecided & (col != 0)
        out[hit] = np.sign(col[hit])
        undecided &= ~hit
    return out


def _offset_grid(shape):
    span = tuple(2 * n - 1 for n in shape)
    grid = np.array(list(np.ndindex(*span)), dtype=int).reshape(-1, len(shape))
    return span, grid - (np.asarray(shape) - 1)


@dataclass(frozen=True)
class BlockToeplitzTensor:
    """Square tensor with Hermitian multilevel Toeplitz structure.

    ``entries[d + shape - 1]`` holds the value shared by every position
    ``(x, y)`` with ``x - y = d``; ``entries`` at ``-d`` is the conjugate.
    """

    shape: tuple
    entries: np.ndarray

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        z = np.array(self.entries, dtype=complex)
        if z.shape != tuple(2 * n - 1 for n in shape):
            raise ValueError("entries must span offsets -(n-1)..(n-1) in every mode")
        z.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "entries", z)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def entry(self, d) -> complex:
        return complex(self.entries[tuple(np.asarray(d) + np.asarray(self.shape) - 1)])

    def matrix(self) -> np.ndarray:
        X = np.array(list(np.ndindex(*self.shape))).reshape(-1, len(self.shape))
        D = X[:, None, :] - X[None, :, :] + (np.asarray(self.shape) - 1)
        return self.entries[tuple(D[..., k] for k in range(len(self.shape)))]

    def tensor(self) -> np.ndarray:
        """Dense tensor with axes ``(x_1..x_r, y_1..y_r)``."""
        return self.matrix().reshape(self.shape + self.shape)

    @classmethod
    def from_atoms(cls, angles, weights, shape) -> "BlockToeplitzTensor":
        """``sum_i w_i (x)_k v(a_ik) (x) conj(v(a_ik))`` in matricized Toeplitz form."""
        shape = tuple(shape)
        angles = np.atleast_2d(np.asarray(angles, float))
        span, grid = _offset_grid(shape)
        phase = np.exp(1j * grid @ angles.T)  # (n_offsets, n_atoms)
        z = phase @ np.atleast_1d(np.asarray(weights, float))
        return cls(shape, z.reshape(span))


def is_block_toeplitz(T, shape, tol: float = 0.0, per_mode_conjugate: bool = False) -> bool:
    """Check the block-Toeplitz ties of a dense tensor.

    Always checks that shifting ``(x_k, y_k)`` together in any one mode
    leaves entries unchanged and that the matricized tensor is Hermitian.
    With ``per_mode_conjugate`` it also checks that swapping ``x_k`` and
    ``y_k`` in a single mode conjugates the entry.  ``T`` may have axes
    ``(x_1..x_r, y_1..y_r)`` or be the matricized square matrix.
    """
    shape = tuple(shape)
    r = len(shape)
    M = int(np.prod(shape))
    T = np.asarray(T, dtype=complex).reshape(shape + shape)
    if np.max(np.abs(T.reshape(M, M) - T.reshape(M, M).conj().T)) > tol:
        return False
    for k in range(r):
        n = shape[k]
        if n >= 2:
            a = [slice(None)] * (2 * r)
            b = [slice(None)] * (2 * r)
            a[k], a[r + k] = slice(1, None), slice(1, None)
            b[k], b[r + k] = slice(None, -1), slice(None, -1)
            if np.max(np.abs(T[tuple(a)] - T[tuple(b)])) > tol:
                return False
        if per_mode_conjugate:
            perm = list(range(2 * r))
            perm[k], perm[r + k] = r + k, k
            if np.max(np.abs(T - np.transpose(T, perm).conj())) > tol:
                return False
    return True


# ---------------------------------------------------------------------------
# Toeplitz variables inside a conic problem


class ToeplitzVariables:
    """Free parameters of a Hermitian multilevel Toeplitz matrix in ``prob``."""

    def __init__(self, prob: ConicProblem, shape: Sequence[int], name: str = "z"):
        self.shape = tuple(int(n) for n in shape)
        self.size = int(np.prod(self.shape))
        self.span, grid = _offset_grid(self.shape)
        sign = _offset_sign(grid)
        positive = np.flatnonzero(sign > 0)
        self.zero_var = int(prob.add_variables(1, f"{name}.0")[0])
        pair = prob.add_variables(2 * positive.size, f"{name}.pairs")
        n = len(grid)
        self._re = np.full(n, -1, dtype=int)
        self._im = np.full(n, -1, dtype=int)
        self._sign = np.zeros(n)
        self._re[positive] = pair[0::2]
        self._im[positive] = pair[1::2]
        self._sign[positive] = 1.0
        negative = np.flatnonzero(sign < 0)
        mirror = self.flat_index(-grid[negative])
        self._re[negative] = self._re[mirror]
        self._im[negative] = self._im[mirror]
        self._sign[negative] = -1.0
        center = self.flat_index(np.zeros((1, len(self.shape)), dtype=int))[0]
        self._re[center] = self.zero_var
        self.n_cols = prob.n_vars

    def flat_index(self, d) -> np.ndarray:
        d = np.atleast_2d(np.asarray(d, dtype=int))
        idx = d + (np.asarray(self.shape) - 1)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.span)):
            raise IndexError("offset outside the Toeplitz span")
        return np.ravel_multi_index(tuple(idx.T), self.span)

    def entry_coef(self, flat) -> sp.csr_matrix:
        """Complex rows expressing ``z[d]`` (given by flat offset indices) in the variables."""
        flat = np.asarray(flat, dtype=int).ravel()
        rows = np.arange(flat.size)
        re = self._re[flat]
        im = self._im[flat]
        has_im = im >= 0
        data = np.concatenate([np.ones(flat.size, complex), 1j * self._sign[flat][has_im]])
        r = np.concatenate([rows, rows[has_im]])
        c = np.concatenate([re, im[has_im]])
        return sp.csr_matrix((data, (r, c)), shape=(flat.size, self.n_cols))

    def matrix_coef(self) -> sp.csr_matrix:
        """Rows expressing the row-major flattened ``mat(Z)``."""
        X = np.array(list(np.ndindex(*self.shape))).reshape(-1, len(self.shape))
        D = (X[:, None, :] - X[None, :, :]).reshape(-1, len(self.shape))
        return self.entry_coef(self.flat_index(D))

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = x[self._re].astype(complex)
        has_im = self._im >= 0
        z[has_im] += 1j * self._sign[has_im] * x[self._im[has_im]]
        return z.reshape(self.span)

    def tensor(self, x) -> BlockToeplitzTensor:
        return BlockToeplitzTensor(self.shape, self.values(x))

    def toeplitz(self, x) -> HermitianToeplitz:
        if len(self.shape) != 1:
            raise ValueError("only one-level Toeplitz matrices have a single column")
        z = self.values(x)
        return HermitianToeplitz(z[self.shape[0] - 1 :])

    def add_psd(self, prob: ConicProblem, label: str = "") -> int:
        return prob.add_hermitian_psd(self.matrix_coef(), np.zeros(self.size * self.size), self.size, label)


# ---------------------------------------------------------------------------
# Wigner index maps


@dataclass(frozen=True)
class WignerIndexMap:
    """Linear maps ``L^(j)`` from Toeplitz offset values to Wigner blocks.

    ``maps[j]`` is a sparse complex matrix of shape ``((2j+1)^2, (2N+1)^3)``
    acting on the row-major flattened offset array ``z`` of a tensor with
    mode sizes ``(N+1, N+1, N+1)``; the modes carry alpha, beta, gamma.
    """

    bandwidth: int
    maps: tuple

    @property
    def shape(self):
        return (self.bandwidth + 1,) * 3

    def apply(self, j: int, entries) -> np.ndarray:
        z = np.asarray(entries, dtype=complex).ravel()
        n = 2 * j + 1
        return (self.maps[j] @ z).reshape(n, n)

    def apply_tensor(self, j: int, T) -> np.ndarray:
        """Apply ``L^(j)`` to a dense tensor with axes ``(x_1..x_3, y_1..y_3)``."""
        N = self.bandwidth
        T = np.asarray(T, dtype=complex).reshape((N + 1,) * 6)
        span, grid = _offset_grid(self.shape)
        x = np.maximum(grid, 0)
        y = np.maximum(-grid, 0)
        z = T[tuple(x.T) + tuple(y.T)]
        return self.apply(j, z)


def _d_fourier(j: int) -> np.ndarray:
    """``a[m'+j, m+j, k+j]`` with ``d_{m',m}(beta) = sum_k a e^{i k beta}``."""
    K = 2 * j + 1
    betas = TWO_PI * np.arange(K) / K
    d = wigner_d_matrix(j, betas)  # (K, m', m)
    a = np.fft.fft(d, axis=0) / K
    k = np.arange(-j, j + 1)
    return np.moveaxis(a[k % K], 0, -1)


def build_wigner_index_maps(N: int, check_points: int = 100, seed: int = 0,
                            tol: float = 1e-9) -> WignerIndexMap:
    """Construct ``L^(j)`` for ``j <= N`` and verify them at random Euler angles."""
    if N < 0:
        raise ValueError("bandwidth must be nonnegative")
    shape = (N + 1,) * 3
    span = tuple(2 * n - 1 for n in shape)
    maps = []
    for j in range(N + 1):
        a = _d_fourier(j)
        rows, cols, vals = [], [], []
        n = 2 * j + 1
        for m in range(-j, j + 1):
            for mp in range(-j, j + 1):
                for k in range(-j, j + 1):
                    c = a[mp + j, m + j, k + j]
                    if abs(c) < 1e-15:
                        continue
                    rows.append((m + j) * n + (mp + j))
                    cols.append(np.ravel_multi_index((-m + N, k + N, -mp + N), span))
                    vals.append(c)
        maps.append(sp.csr_matrix((vals, (rows, cols)), shape=(n * n, int(np.prod(span)))))
    wmap = WignerIndexMap(N, tuple(maps))
    rng = np.random.default_rng(seed)
    _, grid = _offset_grid(shape)
    for _ in range(check_points):
        ang = rng.uniform(0.0, TWO_PI, 3)
        z = np.exp(1j * grid @ ang)
        for j in range(N + 1):
            err = np.linalg.norm(wmap.apply(j, z) - wigner_D_matrix(j, *ang))
            if err > tol:
                raise RuntimeError(f"index map for j={j} misses Wigner matrix by {err:.3e}")
    return wmap


_WIGNER_CACHE: dict = {}


def _cached_maps(N: int) -> WignerIndexMap:
    if N not in _WIGNER_CACHE:
        _WIGNER_CACHE[N] = build_wigner_index_maps(N, check_points=10)
    return _WIGNER_CACHE[N]


# ---------------------------------------------------------------------------
# gauges as reusable program fragments


@dataclass
class GaugeVariables:
    """An operator ``l`` written linearly in conic variables, plus its gauge penalty.

    ``coef @ x`` is the concatenation of the row-major flattened blocks of
    ``l`` (table order); ``penalty_idx`` lists the variables whose sum is
    the gauge value.
    """

    table: IrrepTable
    coef: sp.csr_matrix
    penalty_idx: np.ndarray
    parts: dict = field(default_factory=dict)

    def operator(self, x) -> BlockDiagOperator:
        v = _pad(self.coef, len(x)) @ np.asarray(x, dtype=float)
        return BlockDiagOperator.from_vector(self.table, v)

    def penalty(self, x) -> float:
        return float(np.sum(np.asarray(x)[self.penalty_idx]))


def _pad(m, n):
    m = sp.csr_matrix(m)
    if m.shape[1] < n:
        m = sp.csr_matrix((m.data, m.indices, m.indptr), shape=(m.shape[0], n))
    return m


def _stack_rows(pieces, n_cols):
    return sp.vstack([_pad(p, n_cols) for p in pieces]).tocsr()


def add_so2_gauge(prob: ConicProblem, table: IrrepTable, name: str = "l") -> GaugeVariables:
    """Operator on an SO(2) table with the exact atomic-norm penalty.

    ``l_n = z_n`` and ``l_{-n} = conj(z_n)`` with ``z = z_+ - z_-`` and
    ``z_+, z_-`` first columns of PSD Hermitian Toeplitz matrices.
    """
    if table.group is not Group.SO2:
        raise ValueError("SO2 table required")
    N = table.bandwidth
    zp = ToeplitzVariables(prob, (N + 1,), f"{name}.z+")
    zm = ToeplitzVariables(prob, (N + 1,), f"{name}.z-")
    zp.add_psd(prob, f"{name}.T+")
    zm.add_psd(prob, f"{name}.T-")
    n_cols = prob.n_vars
    offsets = np.array([[lab] for lab in table.labels])
    coef = _pad(zp.entry_coef(zp.flat_index(offsets)), n_cols) - _pad(zm.entry_coef(zm.flat_index(offsets)), n_cols)
    return GaugeVariables(table, coef.tocsr(), np.array([zp.zero_var, zm.zero_var]), {"+": zp, "-": zm})


def add_o2_gauge(prob: ConicProblem, table: IrrepTable, name: str = "l") -> GaugeVariables:
    """Operator on an O(2) table with the exact four-orbitope penalty.

    ``l_0 = z_R0 + z_L0`` and ``l_k = [[z_Rk, z_Lk], [conj z_Lk, conj z_Rk]]``.
    """
    if table.group is not Group.O2:
        raise ValueError("O2 table required")
    N = table.bandwidth
    parts = {}
    for key in ("R+", "R-", "L+", "L-"):
        parts[key] = ToeplitzVariables(prob, (N + 1,), f"{name}.{key}")
        parts[key].add_psd(prob, f"{name}.T{key}")
    n_cols = prob.n_vars

    def z(key, k, conj=False):
        t = parts[key]
        row = _pad(t.entry_coef(t.flat_index([[-k if conj else k]])), n_cols)
        return row

    def diff(kind, k, conj=False):
        return z(kind + "+", k, conj) - z(kind + "-", k, conj)

    pieces = []
    for xi in table:
        k = xi.label
        if k == 0:
            pieces.append(diff("R", 0) + diff("L", 0))
        else:
            pieces.extend([diff("R", k), diff("L", k), diff("L", k, True), diff("R", k, True)])
    coef = _stack_rows(pieces, n_cols)
    pen = np.array([parts[k].zero_var for k in ("R+", "R-", "L+", "L-")])
    return GaugeVariables(table, coef, pen, parts)


def add_so3_gauge(prob: ConicProblem, table: IrrepTable, name: str = "l",
                  maps: Optional[WignerIndexMap] = None) -> GaugeVariables:
    """Operator on an SO(3) table with the block-Toeplitz relaxed penalty.

    ``l_j = L^(j)(z_+ - z_-)`` where ``z_+, z_-`` parametrize PSD
    multilevel Toeplitz matrices of mode sizes ``(N+1)^3`` with ``N`` the
    largest label; the penalty is ``z_+[0] + z_-[0]``.
    """
    if table.group is not Group.SO3:
        raise ValueError("SO3 table required")
    N = max(table.labels)
    maps = _cached_maps(N) if maps is None else maps
    if maps.bandwidth != N:
        raise ValueError("index maps built for a different bandwidth")
    shape = (N + 1,) * 3
    zp = ToeplitzVariables(prob, shape, f"{name}.Z+")
    zm = ToeplitzVariables(prob, shape, f"{name}.Z-")
    zp.add_psd(prob, f"{name}.Z+")
    zm.add_psd(prob, f"{name}.Z-")
    n_cols = prob.n_vars
    all_offsets = np.arange(int(np.prod(zp.span)))
    Ep = _pad(zp.entry_coef(all_offsets), n_cols)
    Em = _pad(zm.entry_coef(all_offsets), n_cols)
    E = (Ep - Em).tocsr()
    coef = _stack_rows([maps.maps[lab] @ E for lab in table.labels], n_cols)
    return GaugeVariables(table, coef, np.array([zp.zero_var, zm.zero_var]), {"+": zp, "-": zm})


def _add_complex_equality(prob: ConicProblem, coef, target, tol: float = 1e-9) -> bool:
    """Impose ``coef x = target`` (complex rows) with redundant rows removed.

    Returns False if the system is inconsistent.
    """
    coef = _pad(coef, prob.n_vars)
    target = np.asarray(target, dtype=complex).ravel()
    A = sp.vstack([coef.real, coef.imag]).toarray()
    b = np.concatenate([target.real, target.imag])
    nz = np.any(A != 0, axis=1)
    if np.max(np.abs(b[~nz]), initial=0.0) > tol * max(1.0, np.max(np.abs(b), initial=0.0)):
        return False
    A, b = A[nz], b[nz]
    if A.shape[0] == 0:
        return True
    _, R, piv = scipy.linalg.qr(A.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * diag[0]))
    keep = np.sort(piv[:rank])
    sol, *_ = np.linalg.lstsq(A[keep], b[keep], rcond=None)
    if np.max(np.abs(A @ sol - b)) > tol * max(1.0, np.max(np.abs(b))):
        return False
    prob.add_equality(sp.csr_matrix(A[keep]), b[keep])
    return True


@dataclass
class GaugeResult:
    value: float
    status: str
    operator: Optional[BlockDiagOperator] = None
    certificates: dict = field(default_factory=dict)


def gauge_value(op: BlockDiagOperator, builder, tol: Optional[float] = None,
                full: bool = False, **kwargs):
    """Minkowski functional of ``op`` for the gauge produced by ``builder``.

    Returns ``inf`` when ``op`` lies outside the span of the atoms; raises
    :class:`SolverError` when the solver fails.
    """
    prob = ConicProblem()
    gauge = builder(prob, op.table, **kwargs)
    if not _add_complex_equality(prob, gauge.coef, op.vector()):
        res = GaugeResult(math.inf, "infeasible")
        return res if full else res.value
    prob.add_linear_objective(gauge.penalty_idx, 1.0)
    sol = solve(prob, tol=tol)
    if sol.status == "infeasible":
        res = GaugeResult(math.inf, "infeasible")
        return res if full else res.value
    sol.require("gauge")
    value = max(0.0, gauge.penalty(sol.x))
    if not full:
        return value
    certs = {}
    for key, part in gauge.parts.items():
        certs[key] = part.toeplitz(sol.x) if len(part.shape) == 1 else part.tensor(sol.x)
    return GaugeResult(value, sol.status, gauge.operator(sol.x), certs)


def minkowski_so2(x, N: Optional[int] = None, tol: Optional[float] = None, full: bool = False):
    """Exact SO(2) atomic norm of a conjugate-symmetric moment vector.

    ``x`` is a :class:`TrigMomentVector`, a folded array ``x_0..x_N``, or a
    :class:`BlockDiagOperator` over an SO(2) table.
    """
    if isinstance(x, BlockDiagOperator):
        op = x
    else:
        folded = x.folded if isinstance(x, TrigMomentVector) else np.asarray(x, dtype=complex).ravel()
        N = folded.size - 1 if N is None else N
        if folded.size != N + 1:
            raise ValueError("folded vector length must be N+1")
        full_vec = np.concatenate([folded[1:][::-1].conj(), folded])
        table = enumerate_irreps(Group.SO2, N)
        op = BlockDiagOperator(table, [np.array([[v]]) for v in full_vec])
    return gauge_value(op, add_so2_gauge, tol=tol, full=full)


def minkowski_o2(Z: BlockDiagOperator, tol: Optional[float] = None, full: bool = False):
    """Exact O(2) atomic norm of a block operator ``(z_0, Z_1..Z_N)``."""
    return gauge_value(Z, add_o2_gauge, tol=tol, full=full)


def so3_operator_norm_relaxed(ell: BlockDiagOperator, tol: Optional[float] = None, full: bool = False):
    """Gauge of ``ell`` with respect to the block-Toeplitz outer approximation."""
    return gauge_value(ell, add_so3_gauge, tol=tol, full=full)


def _per_mode_conjugate_rows(Z: "ToeplitzVariables"):
    """Rows of ``z[flip_k(d)] - conj(z[d]) = 0`` for every offset and mode with ``d_k != 0``."""
    _, grid = _offset_grid(Z.shape)
    rows = []
    for d in grid:
        for k in range(len(Z.shape)):
            if d[k] != 0:
                e = d.copy()
                e[k] = -e[k]
                rows.append(Z.entry_coef(Z.flat_index([e])) - Z.entry_coef(Z.flat_index([d])).conj())
    return sp.vstack(rows).tocsr() if rows else None


def tensor_minkowski_relaxed(T, n: int, tol: Optional[float] = None, full: bool = False,
                             structure: str = "toeplitz"):
    """Relaxed atomic norm of a tensor with three modes of size ``n+1``.

    Solves ``min t/2 + z[0]/2`` subject to
    ``[[t, vec(T)^*], [vec(T), mat(Z)]] PSD`` with ``Z`` Hermitian block
    Toeplitz.  The value lower-bounds the atomic norm over
    ``v(a) (x) v(b) (x) v(c)``.

    ``structure="per-mode-conjugate"`` additionally ties
    ``Z[.., x_k, .., y_k, ..] = conj(Z[.., y_k, .., x_k, ..])`` one mode at a
    time.  Rank-one atom tensors violate those ties, so that variant is not
    a relaxation (single atoms can score above one); it is kept only as a
    diagnostic.
    """
    if structure not in ("toeplitz", "per-mode-conjugate"):
        raise ValueError(f"unknown structure {structure!r}")
    T = np.asarray(T, dtype=complex)
    shape = (n + 1,) * 3
    if T.size != (n + 1) ** 3:
        raise ValueError("tensor must have (n+1)^3 entries")
    vecT = T.reshape(-1)
    M = vecT.size
    prob = ConicProblem()
    t = int(prob.add_variables(1, "t")[0])
    Z = ToeplitzVariables(prob, shape, "Z")
    n_cols = prob.n_vars
    dim = M + 1
    zc = sp.coo_matrix(Z.matrix_coef())
    rows = (zc.row // M + 1) * dim + (zc.row % M + 1)
    coef = sp.csr_matrix(
        (np.concatenate([zc.data, [1.0]]), (np.concatenate([rows, [0]]), np.concatenate([zc.col, [t]]))),
        shape=(dim * dim, n_cols),
    )
    const = np.zeros((dim, dim), complex)
    const[1:, 0] = vecT
    const[0, 1:] = vecT.conj()
    prob.add_hermitian_psd(coef, const.ravel(), dim, "moment")
    if structure == "per-mode-conjugate":
        ties = _per_mode_conjugate_rows(Z)
        if ties is not None:
            _add_complex_equality(prob, ties, np.zeros(ties.shape[0]))
    prob.add_linear_objective([t, Z.zero_var], 0.5)
    sol = solve(prob, tol=tol).require("tensor relaxation")
    value = max(0.0, sol.objective)
    if not full:
        return value
    return GaugeResult(value, sol.status, None, {"Z": Z.tensor(sol.x), "t": float(sol.x[t])})


# ---------------------------------------------------------------------------
# Vandermonde decomposition


def _singular_extension(col: np.ndarray) -> np.ndarray:
    """Next Toeplitz entry making the extended matrix singular PSD.

    The admissible entries form a disk; the point of the boundary in the
    direction of the positive real axis from its center is taken.
    """
    n = col.size
    T = scipy.linalg.toeplitz(col, col.conj())
    P = np.linalg.pinv(T, hermitian=True)
    # last column of the extension: (conj t_n, conj t_{n-1}, ..., conj t_1)
    u0 = np.concatenate([[0.0], col[1:][::-1].conj()])
    Pu = P @ u0
    schur = col[0].real - float(np.real(u0.conj() @ Pu))
    p00 = P[0, 0].real
    center = -Pu[0] / p00
    radius = math.sqrt(max(0.0, schur / p00 + abs(Pu[0]) ** 2 / p00**2))
    s = center + radius
    return np.concatenate([col, [np.conj(s)]])


def vandermonde_decompose(T, rank_tol: float = 1e-8, merge_tol: float = 1e-6,
                          tol: float = 1e-6, psd_tol: float = 1e-9, zero_tol: float = 1e-9) -> list:
    """Atoms ``(theta, weight)`` with ``T = sum w v(theta) v(theta)^*``.

    Uses a Prony polynomial from the null vector of the leading
    ``(r+1) x (r+1)`` block, where ``r`` is the numerical rank (eigenvalues
    above ``rank_tol`` times the largest).  Full-rank inputs are first
    extended by one singular row and column.  Weights come from
    nonnegative least squares on the first column.

    Matrices whose largest eigenvalue is at most ``zero_tol`` are treated
    as zero and give no atoms.

    Raises:
        ValueError: ``T`` has an eigenvalue below ``-psd_tol``.
        VandermondeError: reconstruction error exceeds ``tol``.
    """
    if isinstance(T, HermitianToeplitz):
        col = T.column.copy()
    else:
        col = HermitianToeplitz.from_matrix(T).column.copy()
    n = col.size
    M = scipy.linalg.toeplitz(col, col.conj())
    lam = np.linalg.eigvalsh(M)
    if lam[0] < -psd_tol * max(1.0, lam[-1]):
        raise ValueError(f"matrix is not PSD (min eigenvalue {lam[0]:.3e})")
    if lam[-1] <= zero_tol:
        return []
    rank = int(np.sum(lam > rank_tol * lam[-1]))
    work = col
    if rank == n:
        work = _singular_extension(col)
    S = scipy.linalg.toeplitz(work[: rank + 1], work[: rank + 1].conj())
    _, vecs = np.linalg.eigh(S)
    q = vecs[:, 0]
    # q^* v(theta) = sum_k conj(q_k) e^{i k theta} vanishes at each atom
    coeffs = q.conj()[::-1]
    while coeffs.size > 1 and abs(coeffs[0]) < 1e-14:
        coeffs = coeffs[1:]
    roots = np.roots(coeffs) if coeffs.size > 1 else np.array([])
    thetas = np.sort(np.mod(np.angle(roots), TWO_PI))
    merged = []
    for th in thetas:
        if merged and _circ_dist(th, merged[-1][-1]) < merge_tol:
            merged[-1].append(th)
        else:
            merged.append([th])
    if len(merged) > 1 and _circ_dist(merged[0][0], merged[-1][-1]) < merge_tol:
        merged[0] = merged.pop() + merged[0]
    thetas = np.array([_circ_mean(g) for g in merged])
    if thetas.size == 0:
        raise VandermondeError("no atoms found")
    V = np.exp(1j * np.outer(np.arange(n), thetas))
    A = np.vstack([V.real, V.imag])
    b = np.concatenate([col.real, col.imag])
    w, _ = scipy.optimize.nnls(A, b)
    atoms = [(float(th), float(wi)) for th, wi in zip(thetas, w) if wi > 0.0]
    recon = sum(wi * np.outer(np.exp(1j * np.arange(n) * th), np.exp(-1j * np.arange(n) * th))
                for th, wi in atoms)
    err = float(np.linalg.norm(M - recon))
    if err > tol * max(1.0, float(lam[-1])):
        raise VandermondeError(f"reconstruction error {err:.3e} exceeds tolerance")
    return atoms


def _circ_dist(a, b):
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def _circ_mean(angles):
    return float(np.mod(np.angle(np.mean(np.exp(1j * np.asarray(angles)))), TWO_PI))
