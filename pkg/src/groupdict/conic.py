"""Solver-neutral semidefinite program description and backends.

Problems are stated over a vector ``x`` of real scalar variables:

    minimize    0.5 x'Px + c'x + offset
    subject to  A_eq x = b_eq
                G_k x + h_k >= 0                  (nonnegative rows)
                ||U_k x + u_k||_2 <= t_k'x + s_k  (second-order cones)
                mat(F_k x + f_k) is PSD           (real symmetric blocks)

Structural ties such as Toeplitz equalities are expressed by letting
several matrix entries reference the same scalar variable, so they never
appear as explicit equality rows.  Complex Hermitian blocks are mapped to
real symmetric blocks of twice the size with :func:`hermitian_selectors`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ConicProblem",
    "ConicSolution",
    "SolverError",
    "hermitian_selectors",
    "default_gap_tolerance",
    "default_backend",
    "solve",
]

GAP_ENV_VAR = "GROUPDICT_SOLVER_GAP"
BACKEND_ENV_VAR = "GROUPDICT_SOLVER"
REQUESTED_GAP = 1e-8
ACCEPTED_GAP = 1e-6

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near-optimal"
INFEASIBLE = "infeasible"
FAILURE = "failure"


class SolverError(RuntimeError):
    """Raised by callers that need a solution but got a failure status."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


def default_gap_tolerance() -> float:
    """Requested gap tolerance, overridable through ``GROUPDICT_SOLVER_GAP``."""
    value = os.environ.get(GAP_ENV_VAR)
    if value is None:
        return REQUESTED_GAP
    return float(value)


def _as_csr(mat, n_cols):
    m = sp.csr_matrix(mat)
    if m.shape[1] < n_cols:
        m = sp.csr_matrix((m.data, m.indices, m.indptr), shape=(m.shape[0], n_cols))
    return m


def hermitian_selectors(d: int):
    """Linear maps taking a flattened d x d complex matrix to its real embedding.

    For ``H = A + iB`` the embedding is ``[[A, B^T], [B, A]]`` (row-major,
    size ``2d x 2d``).  Returns ``(S_re, S_im)`` with
    ``vec(embed(H)) = S_re @ vec(Re H) + S_im @ vec(Im H)``.
    """
    n = 2 * d
    rows_re, cols_re, rows_im, cols_im, vals_im = [], [], [], [], []
    for p in range(n):
        for q in range(n):
            a, b = p % d, q % d
            row = p * n + q
            top, left = p < d, q < d
            if top == left:
                rows_re.append(row)
                cols_re.append(a * d + b)
            elif top:
                # upper-right block is B^T: entry (a, b) equals B[b, a]
                rows_im.append(row)
                cols_im.append(b * d + a)
                vals_im.append(1.0)
            else:
                rows_im.append(row)
                cols_im.append(a * d + b)
                vals_im.append(1.0)
    s_re = sp.csr_matrix((np.ones(len(rows_re)), (rows_re, cols_re)), shape=(n * n, d * d))
    s_im = sp.csr_matrix((vals_im, (rows_im, cols_im)), shape=(n * n, d * d))
    return s_re, s_im


@dataclass
class _Block:
    size: int
    coef: sp.csr_matrix
    const: np.ndarray
    label: str = ""


@dataclass
class ConicProblem:
    """Mutable builder for a conic program; see the module docstring."""

    n_vars: int = 0
    _c: list = field(default_factory=list)
    _quad: list = field(default_factory=list)
    offset: float = 0.0
    _eq: list = field(default_factory=list)
    _nonneg: list = field(default_factory=list)
    _soc: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    names: dict = field(default_factory=dict)

    def add_variables(self, n: int, name: Optional[str] = None) -> np.ndarray:
        idx = np.arange(self.n_vars, self.n_vars + n)
        self.n_vars += n
        if name is not None:
            self.names[name] = idx
        return idx

    def add_linear_objective(self, idx, coef) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        self._c.append((idx.copy(), coef.copy()))

    def add_quadratic_objective(self, P) -> None:
        """Add ``0.5 x'Px`` for a symmetric PSD ``P`` over all current variables."""
        self._quad.append(sp.csr_matrix(P))

    def add_squared_residual(self, coef, const, weights=None) -> None:
        """Add ``0.5 * sum_k w_k |coef_k x + const_k|^2`` for complex rows.

        ``coef`` is a (possibly complex) sparse matrix with one row per
        residual entry; ``x`` stays real.
        """
        coef = _as_csr(coef, self.n_vars)
        const = np.asarray(const).ravel()
        w = np.ones(coef.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        W = sp.diags(w)
        P = (coef.conj().T @ W @ coef).real
        lin = np.asarray((coef.conj().T @ (w * const))).ravel().real
        self._quad.append(sp.csr_matrix(P))
        self._c.append((np.arange(coef.shape[1]), lin))
        self.offset += 0.5 * float(np.sum(w * np.abs(const) ** 2))

    def add_equality(self, coef, rhs) -> None:
        self._eq.append((sp.csr_matrix(coef), np.asarray(rhs, dtype=float).ravel()))

    def add_nonneg(self, coef, const) -> None:
        self._nonneg.append((sp.csr_matrix(coef), np.asarray(const, dtype=float).ravel()))

    def add_soc(self, coef, const) -> None:
        """First row is the cone's scalar bound, remaining rows its vector part."""
        self._soc.append((sp.csr_matrix(coef), np.asarray(const, dtype=float).ravel()))

    def add_psd(self, coef, const, size: int, label: str = "") -> int:
        """Require the row-major symmetric matrix ``coef x + const`` to be PSD."""
        coef = sp.csr_matrix(coef)
        if coef.shape[0] != size * size:
            raise ValueError("coefficient rows must equal size**2")
        self.blocks.append(_Block(size, coef, np.asarray(const, dtype=float).ravel(), label))
        return len(self.blocks) - 1

    def add_hermitian_psd(self, coef, const, dim: int, label: str = "") -> int:
        """Require the complex Hermitian ``coef x + const`` (dim x dim) to be PSD."""
        coef = sp.csr_matrix(coef)
        const = np.asarray(const, dtype=complex).ravel()
        s_re, s_im = hermitian_selectors(dim)
        real_coef = s_re @ sp.csr_matrix(coef.real) + s_im @ sp.csr_matrix(coef.imag)
        real_const = s_re @ const.real + s_im @ const.imag
        return self.add_psd(real_coef, real_const, 2 * dim, label)

    # assembled views ------------------------------------------------------

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for idx, coef in self._c:
            np.add.at(c, idx, coef)
        return c

    def objective_matrix(self) -> sp.csr_matrix:
        P = sp.csr_matrix((self.n_vars, self.n_vars))
        for q in self._quad:
            P = P + _pad_square(q, self.n_vars)
        return sp.csr_matrix(P)

    def _stack(self, items):
        if not items:
            return sp.csr_matrix((0, self.n_vars)), np.zeros(0)
        A = sp.vstack([_as_csr(a, self.n_vars) for a, _ in items]).tocsr()
        b = np.concatenate([b for _, b in items])
        return A, b

    def equalities(self):
        return self._stack(self._eq)

    def nonnegs(self):
        return self._stack(self._nonneg)

    def socs(self):
        return [(_as_csr(a, self.n_vars), b) for a, b in self._soc]

    def objective_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        P = self.objective_matrix()
        return float(0.5 * x @ (P @ x) + self.objective_vector() @ x + self.offset)

    def block_value(self, k: int, x) -> np.ndarray:
        blk = self.blocks[k]
        vals = _as_csr(blk.coef, self.n_vars) @ x + blk.const
        return vals.reshape(blk.size, blk.size)

    def dump(self, path) -> None:
        """Write a sparse, SDPA-like plain-text description for debugging."""
        with open(path, "w") as fh:
            fh.write(f"* groupdict conic problem\n{self.n_vars} variables\n")
            fh.write(f"{len(self.blocks)} psd blocks: {' '.join(str(b.size) for b in self.blocks)}\n")
            c = self.objective_vector()
            fh.write("c " + " ".join(f"{v:.17g}" for v in c) + f"\noffset {self.offset:.17g}\n")
            P = sp.coo_matrix(self.objective_matrix())
            for i, j, v in zip(P.row, P.col, P.data):
                if i <= j:
                    fh.write(f"P {i} {j} {v:.17g}\n")
            A, b = self.equalities()
            A = A.tocoo()
            for i, j, v in zip(A.row, A.col, A.data):
                fh.write(f"EQ {i} {j} {v:.17g}\n")
            for i, v in enumerate(b):
                fh.write(f"EQB {i} {v:.17g}\n")
            for k, blk in enumerate(self.blocks):
                F = _as_csr(blk.coef, self.n_vars).tocoo()
                for r, var, v in zip(F.row, F.col, F.data):
                    i, j = divmod(r, blk.size)
                    if i <= j:
                        fh.write(f"F {k} {var + 1} {i + 1} {j + 1} {v:.17g}\n")
                for r in np.flatnonzero(blk.const):
                    i, j = divmod(r, blk.size)
                    if i <= j:
                        fh.write(f"F {k} 0 {i + 1} {j + 1} {blk.const[r]:.17g}\n")


def _pad_square(m, n):
    m = sp.coo_matrix(m)
    return sp.csr_matrix((m.data, (m.row, m.col)), shape=(n, n))


@dataclass
class ConicSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    dual_objective: float
    gap: float
    blocks: list
    duals: Optional[np.ndarray]
    residual: float
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (OPTIMAL, NEAR_OPTIMAL)

    def require(self, context: str = "") -> "ConicSolution":
        if not self.ok:
            raise SolverError(f"{context} solver status {self.status}: {self.message}", self)
        return self


def _svec_index(n):
    rows, cols, scale = [], [], []
    for j in range(n):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
            scale.append(1.0 if i == j else math.sqrt(2.0))
    flat = np.asarray(rows) * n + np.asarray(cols)
    return flat, np.asarray(scale)


def _feasibility_residual(prob: ConicProblem, x) -> float:
    res = 0.0
    A, b = prob.equalities()
    if A.shape[0]:
        res = max(res, float(np.max(np.abs(A @ x - b))))
    G, h = prob.nonnegs()
    if G.shape[0]:
        res = max(res, float(max(0.0, -np.min(G @ x + h))))
    for U, u in prob.socs():
        v = U @ x + u
        res = max(res, float(max(0.0, np.linalg.norm(v[1:]) - v[0])))
    for k in range(len(prob.blocks)):
        M = prob.block_value(k, x)
        M = 0.5 * (M + M.T)
        res = max(res, float(max(0.0, -np.linalg.eigvalsh(M)[0])))
    return res


def _solve_clarabel(prob: ConicProblem, tol: float, max_iter: int):
    import clarabel

    n = prob.n_vars
    P = sp.triu(prob.objective_matrix(), format="csc")
    q = prob.objective_vector()
    A_parts, b_parts, cones = [], [], []
    A_eq, b_eq = prob.equalities()
    if A_eq.shape[0]:
        A_parts.append(A_eq)
        b_parts.append(b_eq)
        cones.append(clarabel.ZeroConeT(A_eq.shape[0]))
    G, h = prob.nonnegs()
    if G.shape[0]:
        A_parts.append(-G)
        b_parts.append(h)
        cones.append(clarabel.NonnegativeConeT(G.shape[0]))
    for U, u in prob.socs():
        A_parts.append(-U)
        b_parts.append(u)
        cones.append(clarabel.SecondOrderConeT(U.shape[0]))
    for blk in prob.blocks:
        flat, scale = _svec_index(blk.size)
        F = _as_csr(blk.coef, n)[flat]
        A_parts.append(-sp.diags(scale) @ F)
        b_parts.append(scale * blk.const[flat])
        cones.append(clarabel.PSDTriangleConeT(blk.size))
    if A_parts:
        A = sp.vstack(A_parts, format="csc")
        b = np.concatenate(b_parts)
    else:
        A = sp.csc_matrix((0, n))
        b = np.zeros(0)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = max_iter
    settings.reduced_tol_gap_abs = ACCEPTED_GAP
    settings.reduced_tol_gap_rel = ACCEPTED_GAP
    settings.reduced_tol_feas = ACCEPTED_GAP
    settings.max_threads = 1
    solver = clarabel.DefaultSolver(sp.csc_matrix(P), q, sp.csc_matrix(A), b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    x = np.asarray(sol.x, dtype=float)
    z = np.asarray(sol.z, dtype=float)
    if status.endswith("Solved") and not status.endswith("AlmostSolved"):
        tag = OPTIMAL
    elif "AlmostSolved" in status:
        tag = NEAR_OPTIMAL
    elif "PrimalInfeasible" in status:
        tag = INFEASIBLE
    else:
        tag = FAILURE
    return tag, x, z, float(sol.obj_val), float(sol.obj_val_dual), status


def _solve_cvxopt(prob: ConicProblem, tol: float, max_iter: int):
    """Primal-dual interior point via CVXOPT.

    Its Schur-complement linear algebra scales with the number of variables
    rather than with the squared PSD block sizes, which suits programs with
    few variables and large Toeplitz blocks.
    """
    import cvxopt
    from cvxopt import solvers

    def spm(M):
        M = sp.coo_matrix(M)
        return cvxopt.spmatrix(M.data.astype(float).tolist(), M.row.tolist(), M.col.tolist(), M.shape)

    n = prob.n_vars
    G_parts, h_parts = [], []
    dims = {"l": 0, "q": [], "s": []}
    G, h = prob.nonnegs()
    if G.shape[0]:
        G_parts.append(-G)
        h_parts.append(h)
        dims["l"] = G.shape[0]
    for U, u in prob.socs():
        G_parts.append(-U)
        h_parts.append(u)
        dims["q"].append(U.shape[0])
    for blk in prob.blocks:
        F = _as_csr(blk.coef, n)
        G_parts.append(-F)
        h_parts.append(blk.const)
        dims["s"].append(blk.size)
    Gc = spm(sp.vstack(G_parts)) if G_parts else cvxopt.spmatrix([], [], [], (0, n))
    hc = cvxopt.matrix(np.concatenate(h_parts) if h_parts else np.zeros(0))
    A_eq, b_eq = prob.equalities()
    Ac = spm(A_eq) if A_eq.shape[0] else cvxopt.spmatrix([], [], [], (0, n))
    bc = cvxopt.matrix(b_eq if A_eq.shape[0] else np.zeros(0))
    q = cvxopt.matrix(prob.objective_vector())
    options = {
        "show_progress": False,
        "abstol": tol,
        "reltol": tol,
        "feastol": min(tol, 1e-8),
        "maxiters": max_iter,
    }
    P = prob.objective_matrix()
    if P.nnz:
        res = solvers.coneqp(spm(P), q, Gc, hc, dims, Ac, bc, options=options)
    else:
        res = solvers.conelp(q, Gc, hc, dims, Ac, bc, options=options)
    status = res["status"]
    x = None if res["x"] is None else np.array(res["x"]).ravel()
    z = None if res["z"] is None else np.array(res["z"]).ravel()
    pval = res.get("primal objective")
    dval = res.get("dual objective")
    if status == "optimal":
        tag = OPTIMAL
    elif status == "primal infeasible":
        tag = INFEASIBLE
    elif x is not None and res.get("relative gap") is not None and pval is not None:
        # "unknown": accept if the iterate meets the relaxed tolerances
        ok = (res["relative gap"] or math.inf) < ACCEPTED_GAP and max(
            res.get("primal infeasibility") or math.inf, res.get("dual infeasibility") or math.inf
        ) < ACCEPTED_GAP
        tag = NEAR_OPTIMAL if ok else FAILURE
    else:
        tag = FAILURE
    pval = math.nan if pval is None else float(pval)
    dval = math.nan if dval is None else float(dval)
    return tag, x, z, pval, dval, status


def _solve_cvxpy(prob: ConicProblem, tol: float, max_iter: int, solver: Optional[str] = None):
    import cvxpy as cp

    n = prob.n_vars
    x = cp.Variable(n)
    P = prob.objective_matrix()
    obj = prob.objective_vector() @ x + prob.offset
    if P.nnz:
        obj = obj + 0.5 * cp.quad_form(x, cp.psd_wrap(P))
    cons = []
    A_eq, b_eq = prob.equalities()
    if A_eq.shape[0]:
        cons.append(A_eq @ x == b_eq)
    G, h = prob.nonnegs()
    if G.shape[0]:
        cons.append(G @ x + h >= 0)
    for U, u in prob.socs():
        v = U @ x + u
        cons.append(cp.SOC(v[0], v[1:]))
    for blk in prob.blocks:
        M = cp.reshape(_as_csr(blk.coef, n) @ x + blk.const, (blk.size, blk.size), order="C")
        cons.append(0.5 * (M + M.T) >> 0)
    problem = cp.Problem(cp.Minimize(obj), cons)
    try:
        problem.solve(solver=solver or "CLARABEL")
    except cp.SolverError as exc:  # pragma: no cover - backend specific
        return FAILURE, None, None, math.nan, math.nan, str(exc)
    status = problem.status
    if status == cp.OPTIMAL:
        tag = OPTIMAL
    elif status == cp.OPTIMAL_INACCURATE:
        tag = NEAR_OPTIMAL
    elif status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        tag = INFEASIBLE
    else:
        tag = FAILURE
    xv = None if x.value is None else np.asarray(x.value, dtype=float)
    val = float(problem.value) if problem.value is not None else math.nan
    # cvxpy does not expose a dual objective uniformly; report the primal value
    return tag, xv, None, val, val, status


def default_backend() -> str:
    """Backend named by ``GROUPDICT_SOLVER``, else ``"auto"``."""
    return os.environ.get(BACKEND_ENV_VAR, "auto")


def solve(
    prob: ConicProblem,
    tol: Optional[float] = None,
    backend: Optional[str] = None,
    max_iter: int = 200,
) -> ConicSolution:
    """Solve ``prob`` and return a status-tagged :class:`ConicSolution`.

    Backends: ``"cvxopt"``, ``"clarabel"``, ``"cvxpy[:SOLVER]"`` and
    ``"auto"`` (CVXOPT, retried with Clarabel when it fails).  Never raises
    on solver trouble; inspect ``status`` or call
    :meth:`ConicSolution.require`.
    """
    backend = default_backend() if backend is None else backend
    if backend == "auto":
        sol = solve(prob, tol, "cvxopt", max_iter)
        if sol.ok or sol.status == INFEASIBLE:
            return sol
        retry = solve(prob, tol, "clarabel", max_iter)
        return retry if retry.ok or retry.status == INFEASIBLE else sol
    tol = default_gap_tolerance() if tol is None else tol
    try:
        if backend == "clarabel":
            tag, x, z, pval, dval, msg = _solve_clarabel(prob, tol, max_iter)
        elif backend == "cvxopt":
            tag, x, z, pval, dval, msg = _solve_cvxopt(prob, tol, max_iter)
        elif backend.startswith("cvxpy"):
            name = backend.split(":", 1)[1] if ":" in backend else None
            tag, x, z, pval, dval, msg = _solve_cvxpy(prob, tol, max_iter, name)
        else:
            raise ValueError(f"unknown backend {backend!r}")
    except ValueError:
        raise
    except Exception as exc:  # noqa: BLE001 - report, never abort
        return ConicSolution(FAILURE, None, math.nan, math.nan, math.inf, [], None, math.inf, repr(exc))

    if tag == INFEASIBLE or x is None or not np.all(np.isfinite(x)):
        return ConicSolution(tag if tag == INFEASIBLE else FAILURE, None, math.inf, dval,
                             math.inf, [], z, math.inf, str(msg))
    if not backend.startswith("cvxpy"):
        pval += prob.offset
        dval += prob.offset
    gap = abs(pval - dval) / max(1.0, abs(pval))
    residual = _feasibility_residual(prob, x)
    if tag == OPTIMAL and gap > ACCEPTED_GAP:
        tag = NEAR_OPTIMAL
    blocks = [prob.block_value(k, x) for k in range(len(prob.blocks))]
    return ConicSolution(tag, x, pval, dval, gap, blocks, z, residual, str(msg))
