"""Alternating minimization for group-invariant dictionaries.

Each outer iteration codes every datapoint against the current atoms,
re-fits the atoms by least squares with the codes fixed, and rescales
the atoms to unit norm.  A datapoint is modeled as

    y_xi  ~  sum_j phi_{j, xi} l_{j, xi}^*

where ``l_j`` is a block-diagonal operator in the convex hull of the
group's representation matrices (scaled by the atomic-norm penalty).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .conic import ConicProblem, SolverError, solve
from .harmonics import (
    BlockDiagOperator,
    FourierCoefficients,
    Group,
    GroupElement,
    IrrepTable,
    act_left_regular,
    plancherel_norm,
    synthesize_many,
    wigner_d_matrix,
)
from .orbitope import _pad, add_o2_gauge, add_so2_gauge, add_so3_gauge

__all__ = [
    "Dictionary",
    "CodingResult",
    "OneSparseCode",
    "FitConfig",
    "FitTrace",
    "SizeGuardError",
    "random_dictionary",
    "model_prediction",
    "coding_objective",
    "code_exact",
    "code_so3_sdp",
    "code_so3_one_sparse",
    "one_sparse_objective",
    "lambda_max",
    "update_dictionary",
    "update_residual",
    "normalize",
    "fit",
    "pair_distance",
    "dictionary_distance",
    "fit_baseline_l1",
]

log = logging.getLogger(__name__)

CODING_MODES = ("so2_exact", "o2_exact", "so3_sdp", "so3_one_sparse")


class SizeGuardError(ValueError):
    """The relaxed SO(3) program was requested above the configured bandwidth cap."""


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True)
class Dictionary:
    """``q`` unit-norm atoms sharing one irrep table.

    Attributes:
        atoms: the atoms.
        reseeded: indices of atoms replaced by random ones during
            normalization because they had collapsed to zero.
    """

    atoms: tuple
    reseeded: tuple = ()

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("a dictionary needs at least one atom")
        table = atoms[0].table
        for a in atoms:
            if a.table != table:
                raise ValueError("atoms must share one irrep table")
            if abs(plancherel_norm(a) - 1.0) > 1e-9:
                raise ValueError("atoms must have unit norm; use normalize()")
        object.__setattr__(self, "atoms", atoms)

    @property
    def table(self) -> IrrepTable:
        return self.atoms[0].table

    @property
    def q(self) -> int:
        return len(self.atoms)

    def __len__(self):
        return len(self.atoms)

    def __getitem__(self, k):
        return self.atoms[k]


@dataclass(frozen=True)
class CodingResult:
    """Optimal operators for one datapoint.

    ``objective = residual + lam * penalty`` where ``residual`` is
    ``sum_xi dim/2 ||y_xi - sum_j phi_j l_j^*||^2``.
    """

    operators: tuple
    residual: float
    penalty: float
    lam: float
    status: str = "optimal"
    certificates: tuple = ()

    @property
    def objective(self) -> float:
        return self.residual + self.lam * self.penalty


@dataclass(frozen=True)
class OneSparseCode:
    """Per-atom real scale and Euler triple, ``l_j = c_j D(alpha_j, beta_j, gamma_j)``.

    Attributes:
        c: real coefficients.
        angles: array (q, 3); alpha, gamma in [0, 2 pi), beta in [0, pi].
        trace: objective after initialization and after every single
            coordinate update.
        complex_c: unrounded complex closed-form values of the last c updates.
    """

    c: np.ndarray
    angles: np.ndarray
    trace: tuple = ()
    complex_c: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        a = np.asarray(self.angles, dtype=float).reshape(c.size, 3).copy()
        a[:, 0] = np.mod(a[:, 0], 2 * math.pi)
        a[:, 2] = np.mod(a[:, 2], 2 * math.pi)
        if np.any((a[:, 1] < -1e-12) | (a[:, 1] > math.pi + 1e-12)):
            raise ValueError("beta must lie in [0, pi]")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "angles", a)

    @property
    def objective(self) -> float:
        return self.trace[-1] if self.trace else math.nan

    def operators(self, table: IrrepTable) -> List[BlockDiagOperator]:
        return [
            BlockDiagOperator.from_element(table, GroupElement.so3(*ang)) * float(c)
            for c, ang in zip(self.c, self.angles)
        ]


@dataclass(frozen=True)
class FitConfig:
    """Settings of :func:`fit`.

    Attributes:
        q: number of atoms.
        lam: sparsity weight.
        iterations: outer iterations.
        mode: one of ``so2_exact``, ``o2_exact``, ``so3_sdp``, ``so3_one_sparse``.
        seed: seeds initialization and re-seeding.
        coding_grid: (alpha, beta, gamma) grid sizes of the one-sparse coder.
        distance_grid: grid sizes of the distance search.
        sweeps: coordinate-descent sweeps of the one-sparse coder.
        refine_distance: run the long local refinement in distances.
        max_sdp_bandwidth: size guard of the relaxed SO(3) coder.
        n_jobs: worker processes for coding (1 = in process).
        tol: solver tolerance override.
    """

    q: int = 1
    lam: float = 0.1
    iterations: int = 15
    mode: str = "so3_sdp"
    seed: int = 0
    coding_grid: tuple = (16, 8, 16)
    distance_grid: tuple = (24, 12, 24)
    sweeps: int = 5
    refine_distance: bool = False
    max_sdp_bandwidth: int = 3
    n_jobs: int = 1
    tol: Optional[float] = None

    def __post_init__(self):
        if self.mode not in CODING_MODES:
            raise ValueError(f"mode must be one of {CODING_MODES}")
        if self.q < 1 or self.iterations < 1 or self.sweeps < 1:
            raise ValueError("q, iterations and sweeps must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if min(self.coding_grid) < 1 or min(self.distance_grid) < 1:
            raise ValueError("grid sizes must be positive")


@dataclass
class FitTrace:
    """Per-iteration records of :func:`fit`."""

    iteration: list = field(default_factory=list)
    coding_objective: list = field(default_factory=list)
    coding_residual: list = field(default_factory=list)
    update_residual: list = field(default_factory=list)
    distance: list = field(default_factory=list)
    reseeded: list = field(default_factory=list)

    def rows(self):
        return list(
            zip(self.iteration, self.coding_objective, self.coding_residual,
                self.update_residual, self.distance, self.reseeded)
        )

    header = ("iteration", "coding_objective", "coding_residual", "update_residual",
              "distance", "reseeded")


# ---------------------------------------------------------------------------
# helpers


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_dictionary(table: IrrepTable, q: int, seed=None) -> Dictionary:
    """Standard complex Gaussian blocks, normalized."""
    rng = _rng(seed)
    return normalize([FourierCoefficients.random(table, rng) for _ in range(q)])


def _atoms(dictionary) -> tuple:
    return tuple(dictionary.atoms) if isinstance(dictionary, Dictionary) else tuple(dictionary)


def model_prediction(dictionary, operators: Sequence[BlockDiagOperator]) -> FourierCoefficients:
    """``sum_j phi_j l_j^*`` blockwise."""
    atoms = _atoms(dictionary)
    table = atoms[0].table
    blocks = [np.zeros((d, d), complex) for d in table.dims]
    for phi, ell in zip(atoms, operators):
        for k in range(len(table)):
            blocks[k] = blocks[k] + phi.blocks[k] @ ell.blocks[k].conj().T
    return FourierCoefficients(table, blocks)


def _residual(y: FourierCoefficients, dictionary, operators, weighted=True) -> float:
    r = y - model_prediction(dictionary, operators)
    if weighted:
        return 0.5 * plancherel_norm(r) ** 2
    return float(sum(np.sum(np.abs(b) ** 2) for b in r.blocks))


def coding_objective(y, dictionary, operators, lam, penalties) -> float:
    return _residual(y, dictionary, operators) + lam * float(np.sum(penalties))


def _residual_rows(y: FourierCoefficients, atoms, gauges, n_cols):
    """Complex rows ``A`` and constant ``b`` with ``A x + b = vec(y - sum phi l^*)``."""
    table = y.table
    rows, consts, weights = [], [], []
    offsets = np.cumsum([0] + [d * d for d in table.dims])
    for k, xi in enumerate(table):
        d = xi.dim
        # row-major vec(l^*) = P conj(vec(l)), P the transpose permutation
        perm = np.arange(d * d).reshape(d, d).T.ravel()
        acc = None
        for phi, g in zip(atoms, gauges):
            C = _pad(g.coef, n_cols)[offsets[k] : offsets[k + 1]]
            Lstar = C[perm].conj()
            term = sp.kron(sp.csr_matrix(phi.blocks[k]), sp.identity(d)) @ Lstar
            acc = term if acc is None else acc + term
        rows.append(-acc)
        consts.append(y.blocks[k].ravel())
        weights.append(np.full(d * d, float(xi.dim)))
    return sp.vstack(rows).tocsr(), np.concatenate(consts), np.concatenate(weights)


def _builder_for(group: Group, mode: Optional[str] = None):
    if group is Group.SO2:
        return add_so2_gauge
    if group is Group.O2:
        return add_o2_gauge
    return add_so3_gauge


def _code_conic(y, dictionary, lam, builder, tol):
    atoms = _atoms(dictionary)
    if any(a.table != y.table for a in atoms):
        raise ValueError("data and atoms must share one irrep table")
    prob = ConicProblem()
    gauges = [builder(prob, y.table, name=f"l{j}") for j in range(len(atoms))]
    A, b, w = _residual_rows(y, atoms, gauges, prob.n_vars)
    prob.add_squared_residual(A, b, w)
    for g in gauges:
        prob.add_linear_objective(g.penalty_idx, lam)
    sol = solve(prob, tol=tol)
    sol.require("sparse coding")
    ops = tuple(g.operator(sol.x) for g in gauges)
    pens = [max(0.0, g.penalty(sol.x)) for g in gauges]
    certs = tuple(
        {key: (part.toeplitz(sol.x) if len(part.shape) == 1 else part.tensor(sol.x))
         for key, part in g.parts.items()}
        for g in gauges
    )
    return CodingResult(ops, _residual(y, atoms, ops), float(sum(pens)), float(lam), sol.status, certs)


# ---------------------------------------------------------------------------
# coding


def code_exact(y: FourierCoefficients, dictionary, lam: float, tol: Optional[float] = None) -> CodingResult:
    """Atomic-norm sparse coding for SO(2) and O(2), where the penalty is exact.

    Raises:
        SolverError: the conic solver failed.
    """
    if y.table.group not in (Group.SO2, Group.O2):
        raise ValueError("code_exact handles SO2 and O2 only")
    return _code_conic(y, dictionary, lam, _builder_for(y.table.group), tol)


def code_so3_sdp(y: FourierCoefficients, dictionary, lam: float, tol: Optional[float] = None,
                 max_bandwidth: int = 3) -> CodingResult:
    """Sparse coding for SO(3) with the block-Toeplitz outer approximation.

    Raises:
        SizeGuardError: the table's largest degree exceeds ``max_bandwidth``.
        SolverError: the conic solver failed.
    """
    if y.table.group is not Group.SO3:
        raise ValueError("code_so3_sdp handles SO3 only")
    N = max(y.table.labels)
    if N > max_bandwidth:
        raise SizeGuardError(
            f"relaxed SO(3) coding at degree {N} exceeds the cap {max_bandwidth}; "
            "raise max_bandwidth or use the one-sparse coder"
        )
    return _code_conic(y, dictionary, lam, add_so3_gauge, tol)


def lambda_max(y: FourierCoefficients, dictionary, tol: Optional[float] = None) -> float:
    """Smallest ``lam`` for which all-zero operators are optimal.

    Computed as ``max_j`` of the support function of the (relaxed) unit
    gauge ball at ``M_j = phi_j^H y``, each by one semidefinite program.
    """
    atoms = _atoms(dictionary)
    builder = _builder_for(y.table.group)
    best = 0.0
    for phi in atoms:
        prob = ConicProblem()
        g = builder(prob, y.table, name="l")
        coef = _pad(g.coef, prob.n_vars)
        # Re sum_xi dim tr(l_xi M_xi) = Re <w, C x>, w[a, b] = dim M[b, a]
        w = np.concatenate(
            [xi.dim * (pb.conj().T @ yb).T.ravel() for xi, pb, yb in zip(y.table, phi.blocks, y.blocks)]
        )
        c = -np.asarray((coef.T @ w)).ravel().real
        prob.add_linear_objective(np.arange(prob.n_vars), c)
        row = sp.csr_matrix((np.ones(len(g.penalty_idx)), (np.zeros(len(g.penalty_idx)), g.penalty_idx)),
                            shape=(1, prob.n_vars))
        prob.add_equality(row, [1.0])
        sol = solve(prob, tol=tol)
        sol.require("lambda_max")
        best = max(best, -float(c @ sol.x))
    return best


def one_sparse_objective(y: FourierCoefficients, dictionary, c, angles) -> float:
    """``sum_xi ||y_xi - sum_j c_j phi_{j, xi} D_xi(g_j)^*||_F^2`` (unweighted)."""
    atoms = _atoms(dictionary)
    total = 0.0
    Ds = [_wigner_blocks(y.table, *np.asarray(a, float)) for a in np.reshape(angles, (-1, 3))]
    for k in range(len(y.table)):
        r = y.blocks[k].copy()
        for cj, phi, D in zip(c, atoms, Ds):
            r = r - cj * phi.blocks[k] @ D[k].conj().T
        total += float(np.sum(np.abs(r) ** 2))
    return total


def _wigner_blocks(table: IrrepTable, alpha, beta, gamma):
    """``D^(j)(alpha, beta, gamma)`` for every table entry, vectorized over angle arrays."""
    alpha, beta, gamma = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float),
                                             np.asarray(gamma, float))
    out = []
    for xi in table:
        j = xi.label
        m = np.arange(-j, j + 1)
        d = wigner_d_matrix(j, beta)  # d[..., m', m]
        ea = np.exp(-1j * alpha[..., None] * m)
        eg = np.exp(-1j * gamma[..., None] * m)
        # D_{m, m'} = e^{-i m a} d_{m', m} e^{-i m' g}
        out.append(ea[..., :, None] * np.swapaxes(d, -1, -2) * eg[..., None, :])
    return out


def _overlap(table, R_blocks, phi_blocks, alpha, beta, gamma):
    """``Re <R, phi D(g)^*>`` (unweighted) for arrays of angles."""
    Ds = _wigner_blocks(table, alpha, beta, gamma)
    total = 0.0
    for k in range(len(table)):
        # <R, phi D^*> = tr((phi D^*)^H R) = tr(D phi^H R) = sum_ab D_ab M_ba
        M = phi_blocks[k].conj().T @ R_blocks[k]
        total = total + np.einsum("...ab,ba->...", Ds[k], M)
    return np.real(total)


def code_so3_one_sparse(y: FourierCoefficients, dictionary, grid=(16, 8, 16), sweeps: int = 5,
                        init: Optional[OneSparseCode] = None) -> OneSparseCode:
    """One group element per atom, by cyclic coordinate descent over alpha, beta, gamma, c.

    Each atom starts from the best point of a joint coarse grid search (or
    from ``init``).  Every angle update searches its 1-D grid plus the
    current value; the ``c`` update is the real part of the closed form.
    An update is kept only if the directly evaluated objective does not
    increase, so the recorded trace is non-increasing.
    """
    if y.table.group is not Group.SO3:
        raise ValueError("one-sparse coding is implemented for SO3")
    if sweeps < 1:
        raise ValueError("sweeps must be positive")
    atoms = _atoms(dictionary)
    q = len(atoms)
    table = y.table
    na, nb, ng = grid
    ga = 2 * math.pi * np.arange(na) / na
    gb = (np.arange(nb) + 0.5) * math.pi / nb
    gg = 2 * math.pi * np.arange(ng) / ng
    norms2 = [float(sum(np.sum(np.abs(b) ** 2) for b in phi.blocks)) for phi in atoms]

    c = np.zeros(q)
    ang = np.zeros((q, 3))
    if init is not None:
        c[:] = init.c
        ang[:] = init.angles

    def partial_residual(j):
        ops = [c[k] for k in range(q)]
        ops[j] = 0.0
        Ds = [_wigner_blocks(table, *ang[k]) for k in range(q)]
        R = []
        for b in range(len(table)):
            r = y.blocks[b].copy()
            for k in range(q):
                if k != j and ops[k] != 0.0:
                    r = r - ops[k] * atoms[k].blocks[b] @ Ds[k][b].conj().T
            R.append(r)
        return R

    def objective():
        return one_sparse_objective(y, atoms, c, ang)

    if init is None:
        A, B, G = np.meshgrid(ga, gb, gg, indexing="ij")
        for j in range(q):
            if norms2[j] == 0.0:
                continue
            R = partial_residual(j)
            ov = _overlap(table, R, atoms[j].blocks, A, B, G)
            idx = np.unravel_index(np.argmax(np.abs(ov)), ov.shape)
            ang[j] = (A[idx], B[idx], G[idx])
            c[j] = ov[idx] / norms2[j]

    trace = [objective()]
    complex_c = [complex(v) for v in c]

    for _ in range(sweeps):
        for j in range(q):
            if norms2[j] == 0.0:
                continue
            R = partial_residual(j)
            rr = float(sum(np.sum(np.abs(r) ** 2) for r in R))
            for axis, cand in ((0, ga), (1, gb), (2, gg)):
                cands = np.append(cand, ang[j, axis])
                pts = np.repeat(ang[j][None, :], cands.size, axis=0)
                pts[:, axis] = cands
                ov = _overlap(table, R, atoms[j].blocks, pts[:, 0], pts[:, 1], pts[:, 2])
                vals = rr - 2 * c[j] * ov + c[j] ** 2 * norms2[j]
                best = pts[int(np.argmin(vals))]
                old = ang[j].copy()
                ang[j] = best
                new = objective()
                if new <= trace[-1]:
                    trace.append(new)
                else:
                    ang[j] = old
                    trace.append(trace[-1])
            # closed form for c
            Ds = _wigner_blocks(table, *ang[j])
            num = sum(np.vdot(atoms[j].blocks[b] @ Ds[b].conj().T, R[b]) for b in range(len(table)))
            complex_c[j] = complex(num / norms2[j])
            old = c[j]
            c[j] = float(np.real(num)) / norms2[j]
            new = objective()
            if new <= trace[-1]:
                trace.append(new)
            else:
                c[j] = old
                trace.append(trace[-1])
    return OneSparseCode(c, ang, tuple(trace), tuple(complex_c))


# ---------------------------------------------------------------------------
# dictionary update


def update_dictionary(dataset: Sequence[FourierCoefficients], operators: Sequence[Sequence[BlockDiagOperator]],
                      table: IrrepTable, rcond: float = 1e-10) -> List[FourierCoefficients]:
    """Least-squares atoms for fixed operators, one pseudoinverse per irrep.

    Solves ``Phi_xi G_xi = B_xi`` with ``G = sum_i L_i L_i^*``,
    ``B = sum_i y_i L_i^*`` and ``L_i`` the stacked ``l_{i, j}^*``.
    Singular values below ``rcond * sigma_max`` are dropped.
    """
    if len(dataset) != len(operators):
        raise ValueError("one operator list per datapoint is required")
    q = len(operators[0])
    blocks = [[None] * len(table) for _ in range(q)]
    for k, xi in enumerate(table):
        d = xi.dim
        G = np.zeros((q * d, q * d), complex)
        B = np.zeros((d, q * d), complex)
        for y, ops in zip(dataset, operators):
            if len(ops) != q:
                raise ValueError("every datapoint needs q operators")
            L = np.vstack([ell.blocks[k].conj().T for ell in ops])
            G += L @ L.conj().T
            B += y.blocks[k] @ L.conj().T
        Phi = B @ np.linalg.pinv(G, rcond=rcond, hermitian=True)
        for j in range(q):
            blocks[j][k] = Phi[:, j * d : (j + 1) * d]
    return [FourierCoefficients(table, b) for b in blocks]


def update_residual(dataset, atoms, operators) -> float:
    return float(sum(_residual(y, atoms, ops) for y, ops in zip(dataset, operators)))


def normalize(atoms, rng=None) -> Dictionary:
    """Scale every atom to unit norm; zero atoms are replaced by random unit atoms."""
    atoms = list(_atoms(atoms))
    gen = None
    out, reseeded = [], []
    for k, a in enumerate(atoms):
        nrm = plancherel_norm(a)
        if not np.isfinite(nrm) or nrm < 1e-12:
            gen = gen or _rng(rng)
            a = FourierCoefficients.random(a.table, gen)
            nrm = plancherel_norm(a)
            reseeded.append(k)
            log.warning("atom %d collapsed to zero and was re-seeded", k)
        out.append(a * (1.0 / nrm))
    return Dictionary(tuple(out), tuple(reseeded))


# ---------------------------------------------------------------------------
# fit


def _code_one(args):
    y, atoms, cfg, init = args
    if cfg.mode in ("so2_exact", "o2_exact"):
        res = code_exact(y, atoms, cfg.lam, tol=cfg.tol)
        return res.operators, res.residual, res.objective, None
    if cfg.mode == "so3_sdp":
        res = code_so3_sdp(y, atoms, cfg.lam, tol=cfg.tol, max_bandwidth=cfg.max_sdp_bandwidth)
        return res.operators, res.residual, res.objective, None
    code = code_so3_one_sparse(y, atoms, cfg.coding_grid, cfg.sweeps)
    ops = code.operators(y.table)
    return tuple(ops), _residual(y, atoms, ops), code.objective, code


def fit(dataset: Sequence[FourierCoefficients], cfg: FitConfig, reference=None, init=None,
        callback=None):
    """Learn ``cfg.q`` atoms from ``dataset``.

    Args:
        dataset: Fourier coefficients sharing one table.
        cfg: settings.
        reference: optional generating dictionary; its distance to the
            iterate is recorded after every iteration.
        init: optional starting dictionary (random otherwise).
        callback: called as ``callback(iteration, dictionary, trace)``.

    Returns:
        ``(dictionary, trace, codes)`` where ``codes`` holds the last
        one-sparse codes (empty for the conic modes).
    """
    if not dataset:
        raise ValueError("empty dataset")
    table = dataset[0].table
    if any(y.table != table for y in dataset):
        raise ValueError("all datapoints must share one irrep table")
    expected = {"so2_exact": Group.SO2, "o2_exact": Group.O2}.get(cfg.mode, Group.SO3)
    if table.group is not expected:
        raise ValueError(f"mode {cfg.mode} does not match group {table.group.value}")
    rng = np.random.default_rng(cfg.seed)
    dictionary = random_dictionary(table, cfg.q, rng) if init is None else normalize(init)
    if reference is not None:
        reference = normalize(reference)
    trace = FitTrace()
    codes = []
    for it in range(1, cfg.iterations + 1):
        atoms = dictionary.atoms
        jobs = [(y, atoms, cfg, None) for y in dataset]
        try:
            if cfg.n_jobs != 1:
                from joblib import Parallel, delayed

                results = Parallel(n_jobs=cfg.n_jobs)(delayed(_code_one)(a) for a in jobs)
            else:
                results = [_code_one(a) for a in jobs]
        except SolverError as exc:
            raise SolverError(f"iteration {it}: {exc}", getattr(exc, "solution", None)) from exc
        operators = [r[0] for r in results]
        codes = [r[3] for r in results if r[3] is not None]
        trace.iteration.append(it)
        trace.coding_residual.append(float(sum(r[1] for r in results)))
        trace.coding_objective.append(float(sum(r[2] for r in results)))
        new_atoms = update_dictionary(dataset, operators, table)
        trace.update_residual.append(update_residual(dataset, new_atoms, operators))
        dictionary = normalize(new_atoms, rng)
        trace.reseeded.append(len(dictionary.reseeded))
        if reference is not None:
            trace.distance.append(
                dictionary_distance(dictionary, reference, cfg.distance_grid, refine=cfg.refine_distance)
            )
        else:
            trace.distance.append(math.nan)
        log.info("iteration %d: objective %.6g distance %.4g", it, trace.coding_objective[-1],
                 trace.distance[-1])
        if callback is not None:
            callback(it, dictionary, trace)
    return dictionary, trace, codes


# ---------------------------------------------------------------------------
# distances


def _abs_overlap(M: FourierCoefficients, pts: np.ndarray) -> np.ndarray:
    """``|<phi, g . psi>|`` at group points given ``M = phi^H psi`` blockwise."""
    Mh = M.map_blocks(lambda xi, b: b.conj().T)
    group = M.table.group
    if group is Group.SO3:
        return np.abs(synthesize_many(Mh, pts[:, 0], pts[:, 1], pts[:, 2]))
    refl = pts[:, 1] > 0.5 if group is Group.O2 else None
    return np.abs(synthesize_many(Mh, pts[:, 0], reflection=refl))


def _search_points(group: Group, grid) -> tuple:
    if group is Group.SO3:
        na, nb, ng = grid
        a = 2 * math.pi * np.arange(na) / na
        b = (np.arange(nb) + 0.5) * math.pi / nb
        g = 2 * math.pi * np.arange(ng) / ng
        A, B, G = np.meshgrid(a, b, g, indexing="ij")
        pts = np.stack([A.ravel(), B.ravel(), G.ravel()], axis=1)
        return pts, np.array([2 * math.pi / na, math.pi / nb, 2 * math.pi / ng])
    K = grid[0] if len(grid) == 1 else int(np.prod(grid))
    t = 2 * math.pi * np.arange(K) / K
    if group is Group.O2:
        pts = np.concatenate([np.stack([t, np.zeros(K)], 1), np.stack([t, np.ones(K)], 1)])
    else:
        pts = np.stack([t, np.zeros(K)], 1)
    return pts, np.array([2 * math.pi / K, 0.0])


def _pattern_search(M, pt, step, value, halvings):
    pt = pt.copy()
    active = np.flatnonzero(step > 0)
    for _ in range(halvings):
        improved = True
        while improved:
            improved = False
            cands = []
            for ax in active:
                for s in (-1.0, 1.0):
                    p = pt.copy()
                    p[ax] += s * step[ax]
                    cands.append(p)
            cands = np.array(cands)
            vals = _abs_overlap(M, cands)
            k = int(np.argmax(vals))
            if vals[k] > value + 1e-15:
                value, pt, improved = float(vals[k]), cands[k], True
        step = step / 2
    return pt, value


def pair_distance(phi: FourierCoefficients, psi: FourierCoefficients, grid=(24, 12, 24),
                  refine: bool = False, return_element: bool = False):
    """``min_{g, theta} ||phi - e^{i theta} g . psi||`` in the Plancherel norm.

    The phase is optimal in closed form, so the search maximizes
    ``|<phi, g . psi>|`` over a grid followed by a pattern search that
    halves its steps 3 times (30 with ``refine``).
    """
    if phi.table != psi.table:
        raise ValueError("atoms must share one irrep table")
    group = phi.table.group
    M = FourierCoefficients(phi.table, [a.conj().T @ b for a, b in zip(phi.blocks, psi.blocks)])
    # weights: <phi, g psi> = sum dim tr(phi^H psi rho^*); fold dim into synthesis
    if group is Group.SO3 and len(grid) != 3:
        raise ValueError("SO3 distance grid needs three sizes")
    pts, step = _search_points(group, grid)
    vals = _abs_overlap(M, pts)
    order = np.argsort(vals)[::-1][:3]
    halvings = 30 if refine else 3
    best_pt, best = pts[order[0]], float(vals[order[0]])
    for k in order:
        p, v = _pattern_search(M, pts[k], step, float(vals[k]), halvings)
        if v > best:
            best_pt, best = p, v
    n1 = plancherel_norm(phi) ** 2
    n2 = plancherel_norm(psi) ** 2
    dist = math.sqrt(max(0.0, n1 + n2 - 2 * best))
    if not return_element:
        return dist
    if group is Group.SO3:
        g = GroupElement.so3(*best_pt)
    elif group is Group.O2:
        g = GroupElement.o2(best_pt[0], bool(best_pt[1] > 0.5))
    else:
        g = GroupElement.so2(best_pt[0])
    return dist, g


def dictionary_distance(Phi, Psi, grid=None, refine: bool = False) -> float:
    """``min_pi max_j pair_distance(phi_j, psi_pi(j))`` by exhaustive search (q <= 8).

    Raises:
        ValueError: sizes differ, or q > 8.
    """
    A, B = _atoms(Phi), _atoms(Psi)
    if len(A) != len(B):
        raise ValueError("dictionaries must have the same size")
    if len(A) > 8:
        raise ValueError("exhaustive permutation search is limited to q <= 8")
    if grid is None:
        grid = (24, 12, 24) if A[0].table.group is Group.SO3 else (360,)
    D = np.array([[pair_distance(a, b, grid, refine) for b in B] for a in A])
    q = len(A)
    return float(min(max(D[j, p[j]] for j in range(q)) for p in itertools.permutations(range(q))))


# ---------------------------------------------------------------------------
# baseline


def _lasso(Phi: np.ndarray, y: np.ndarray, lam: float, tol=None) -> np.ndarray:
    """``argmin 0.5 ||y - Phi a||^2 + lam ||a||_1`` through the conic layer."""
    q = Phi.shape[1]
    if not np.any(y) or not np.any(Phi):
        return np.zeros(q)
    prob = ConicProblem()
    a = prob.add_variables(q, "a")
    t = prob.add_variables(q, "t")
    n = prob.n_vars
    prob.add_squared_residual(sp.hstack([sp.csr_matrix(-Phi), sp.csr_matrix((Phi.shape[0], q))]), y)
    prob.add_linear_objective(t, lam)
    I = sp.identity(q)
    prob.add_nonneg(sp.hstack([-I, I]), np.zeros(q))
    prob.add_nonneg(sp.hstack([I, I]), np.zeros(q))
    sol = solve(prob, tol=tol)
    sol.require("lasso")
    return sol.x[a]


def fit_baseline_l1(Y, q: int, lam: float, iterations: int, seed=0, callback=None, tol=None):
    """Plain dictionary learning on real vectors (rows of ``Y``).

    Alternates L1-regularized coding with an unconstrained least-squares
    atom update followed by rescaling to unit norm.

    Returns:
        ``(atoms, codes, objective_trace)`` with atoms as columns.
    """
    Y = np.asarray(Y, dtype=float)
    n, p = Y.shape
    rng = _rng(seed)
    Phi = rng.standard_normal((p, q))
    Phi /= np.linalg.norm(Phi, axis=0, keepdims=True)
    A = np.zeros((n, q))
    trace = []
    for it in range(1, iterations + 1):
        A = np.array([_lasso(Phi, y, lam, tol) for y in Y])
        trace.append(float(0.5 * np.sum((Y - A @ Phi.T) ** 2) + lam * np.sum(np.abs(A))))
        Phi = np.linalg.lstsq(A, Y, rcond=None)[0].T if np.any(A) else Phi.copy()
        norms = np.linalg.norm(Phi, axis=0)
        for k in range(q):
            if norms[k] < 1e-12:
                Phi[:, k] = rng.standard_normal(p)
                norms[k] = np.linalg.norm(Phi[:, k])
        Phi = Phi / norms
        if callback is not None:
            callback(it, Phi, trace)
    if not np.any(Y):
        A = np.zeros((n, q))
    return Phi, A, trace
