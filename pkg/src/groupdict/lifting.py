"""Moving data between homogeneous spaces, the sphere, and SO(3).

A function ``y`` on a homogeneous space ``X = G x0`` lifts to
``f_y(g) = y(g x0)``, which is constant on cosets ``g Stab(x0)``.  The
reverse direction averages a function on ``G`` over the stabilizer.

Raster images enter through a planar chart of the sphere: pixel centers
cover the square ``[-s, s]^2`` with ``s = 1/sqrt(2)``; a unit vector
``u = (x, y, z)`` reads the image at ``(x, y) / (1 + z)`` by bilinear
interpolation and is zero outside the square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.ndimage import map_coordinates

from .harmonics import (
    FourierCoefficients,
    Group,
    GroupElement,
    QuadratureGrid,
    enumerate_irreps,
    euler_to_matrix,
    fourier_transform,
    irrep_matrix,
    matrix_to_euler,
    quadrature_grid,
    synthesize_many,
)

__all__ = [
    "RasterImage",
    "SphericalFunction",
    "HomogeneousLiftConfig",
    "NotTransitiveError",
    "CHART_HALF_WIDTH",
    "sphere_config",
    "witness_north",
    "image_to_sphere",
    "lift_image_to_so3_coeffs",
    "lift_homogeneous",
    "project_to_homogeneous",
    "render_atom",
    "half_turn_x",
    "real_symmetry_residual",
    "symmetry_reduced_dimension",
]

CHART_HALF_WIDTH = 1.0 / math.sqrt(2.0)


class NotTransitiveError(ValueError):
    """A sample point cannot be reached from the origin."""


# ---------------------------------------------------------------------------
# images


@dataclass(frozen=True)
class RasterImage:
    """Grayscale image, row-major, nominal intensities in [0, 1]."""

    width: int
    height: int
    intensities: np.ndarray

    def __post_init__(self):
        a = np.array(self.intensities, dtype=float).reshape(self.height, self.width)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not np.all(np.isfinite(a)):
            raise ValueError("image contains non-finite values")
        a.setflags(write=False)
        object.__setattr__(self, "intensities", a)

    @classmethod
    def from_array(cls, a) -> "RasterImage":
        a = np.asarray(a, dtype=float)
        return cls(a.shape[1], a.shape[0], a)

    def pixel_coordinates(self):
        """Chart coordinates ``(x, y)`` of every pixel center, each of shape (H, W)."""
        s = CHART_HALF_WIDTH
        cols = -s + 2 * s * np.arange(self.width) / max(self.width - 1, 1)
        rows = s - 2 * s * np.arange(self.height) / max(self.height - 1, 1)
        return np.meshgrid(cols, rows)

    def sample(self, x, y) -> np.ndarray:
        """Bilinear interpolation at chart coordinates; zero outside the square."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = CHART_HALF_WIDTH
        col = (x + s) / (2 * s) * (self.width - 1)
        row = (s - y) / (2 * s) * (self.height - 1)
        eps = 1e-12
        inside = (np.abs(x) <= s + eps) & (np.abs(y) <= s + eps)
        vals = map_coordinates(self.intensities, [row.ravel(), col.ravel()], order=1, mode="nearest")
        return np.where(inside, vals.reshape(x.shape), 0.0)

    def rescaled(self) -> "RasterImage":
        """Affinely map the value range onto [0, 1]; constant images are clipped."""
        a = self.intensities
        lo, hi = float(a.min()), float(a.max())
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            return RasterImage.from_array(np.clip(a, 0.0, 1.0))
        return RasterImage.from_array((a - lo) / (hi - lo))

    # PGM (P5, 8 bit) ------------------------------------------------------
    def to_pgm_bytes(self) -> bytes:
        data = np.round(np.clip(self.intensities, 0.0, 1.0) * 255).astype(np.uint8)
        return f"P5\n{self.width} {self.height}\n255\n".encode("ascii") + data.tobytes()

    def write_pgm(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_pgm_bytes())

    @classmethod
    def read_pgm(cls, path) -> "RasterImage":
        with open(path, "rb") as fh:
            raw = fh.read()
        tokens, pos = [], 0
        while len(tokens) < 4:
            while raw[pos : pos + 1].isspace():
                pos += 1
            if raw[pos : pos + 1] == b"#":
                pos = raw.index(b"\n", pos) + 1
                continue
            start = pos
            while not raw[pos : pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos])
        if tokens[0] != b"P5":
            raise ValueError("not a binary PGM file")
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        if maxval > 255:
            raise ValueError("only 8-bit PGM is supported")
        pos += 1
        data = np.frombuffer(raw[pos : pos + w * h], dtype=np.uint8)
        if data.size != w * h:
            raise ValueError("truncated PGM data")
        return cls(w, h, data.reshape(h, w) / maxval)

    def write_png(self, path) -> None:
        from PIL import Image

        data = np.round(np.clip(self.intensities, 0.0, 1.0) * 255).astype(np.uint8)
        Image.fromarray(data, mode="L").save(path)


def image_to_sphere(img: RasterImage, u) -> np.ndarray:
    """Value of the spherical image ``h(u)`` at unit vectors ``u`` (shape (..., 3))."""
    u = np.asarray(u, dtype=float)
    denom = 1.0 + u[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.where(denom > 1e-12, u[..., 0] / denom, np.inf)
        py = np.where(denom > 1e-12, u[..., 1] / denom, np.inf)
    return img.sample(px, py)


@dataclass(frozen=True)
class SphericalFunction:
    """A function on the unit sphere given by an evaluator over unit vectors."""

    evaluate: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_image(cls, img: RasterImage) -> "SphericalFunction":
        return cls(lambda u: image_to_sphere(img, u))

    def __call__(self, u):
        return self.evaluate(np.asarray(u, dtype=float))

    def rotated(self, g: GroupElement) -> "SphericalFunction":
        """``u -> h(g^{-1} u)``."""
        Rinv = g.matrix().T
        return SphericalFunction(lambda u: self.evaluate(np.asarray(u) @ Rinv.T))


# ---------------------------------------------------------------------------
# homogeneous spaces


def witness_north(u) -> np.ndarray:
    """Rotation ``Z(a) Y(b)`` taking ``e3`` to ``u``; vectorized over leading axes."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    beta = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
    alpha = np.arctan2(-u[..., 1], u[..., 0])
    return euler_to_matrix(alpha, beta, np.zeros_like(alpha))


@dataclass(frozen=True)
class HomogeneousLiftConfig:
    """Data describing the sphere ``S^2`` as ``SO(3) / Stab(x0)``.

    Attributes:
        group: acting group (SO3).
        origin: base point ``x0``.
        stabilizer: rotation matrices fixing ``x0``, equally spaced.
        frame: rotation ``W0`` with ``W0 e3 = x0``.
    """

    group: Group
    origin: np.ndarray
    stabilizer: np.ndarray
    frame: np.ndarray = field(default=None)

    def __post_init__(self):
        x0 = np.asarray(self.origin, dtype=float)
        x0 = x0 / np.linalg.norm(x0)
        object.__setattr__(self, "origin", x0)
        object.__setattr__(self, "group", Group(self.group))
        if self.frame is None:
            object.__setattr__(self, "frame", witness_north(x0))
        S = np.asarray(self.stabilizer, dtype=float)
        if np.max(np.abs(S @ x0 - x0)) > 1e-9:
            raise ValueError("stabilizer samples must fix the origin")
        object.__setattr__(self, "stabilizer", S)

    def witness(self, u) -> np.ndarray:
        """Rotations ``g`` with ``g x0 = u``."""
        return witness_north(u) @ self.frame.T

    def act(self, g) -> np.ndarray:
        return np.asarray(g) @ self.origin


def sphere_config(N: int, origin=(0.0, 0.0, 1.0), n_stabilizer: Optional[int] = None) -> HomogeneousLiftConfig:
    """Sphere configuration with ``2N + 2`` equally spaced stabilizer rotations."""
    K = 2 * N + 2 if n_stabilizer is None else n_stabilizer
    x0 = np.asarray(origin, dtype=float)
    x0 = x0 / np.linalg.norm(x0)
    W0 = witness_north(x0)
    t = 2 * math.pi * np.arange(K) / K
    Z = euler_to_matrix(t, np.zeros(K), np.zeros(K))
    S = W0 @ Z @ W0.T
    return HomogeneousLiftConfig(Group.SO3, x0, S, W0)


def lift_homogeneous(y, cfg: HomogeneousLiftConfig, grid,
                     points=None, tol: float = 1e-9) -> np.ndarray:
    """Tabulate ``f_y(g) = y(g x0)`` on ``grid``.

    Args:
        y: vectorized callable on unit vectors of shape (..., 3).
        cfg: homogeneous-space description.
        grid: SO(3) quadrature grid, or rotation matrices of shape (..., 3, 3).
        points: optional sample set of ``X``; each point must be reachable
            from ``x0`` by its witness rotation.
        tol: reachability tolerance.

    Raises:
        NotTransitiveError: a sample point is not reachable from ``x0``.
    """
    if points is not None:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        reach = np.einsum("nij,j->ni", cfg.witness(P), cfg.origin)
        bad = np.linalg.norm(reach - P, axis=1) > tol
        if np.any(bad):
            raise NotTransitiveError(f"{int(bad.sum())} sample points are off the orbit of the origin")
    R = grid.rotation_matrices() if isinstance(grid, QuadratureGrid) else np.asarray(grid, dtype=float)
    return np.asarray(y(R @ cfg.origin), dtype=float)


def project_to_homogeneous(phi: FourierCoefficients, cfg: HomogeneousLiftConfig, x) -> np.ndarray:
    """Average of ``phi(g z)`` over the stabilizer samples ``z``, with ``g x0 = x``.

    ``x`` may be a single point or an array of points (..., 3); the real
    part is returned.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    P = np.atleast_2d(x)
    lead = P.shape[:-1]
    G = cfg.witness(P.reshape(-1, 3))  # (n, 3, 3)
    R = np.einsum("nij,kjl->nkil", G, cfg.stabilizer)  # (n, K, 3, 3)
    a, b, c = matrix_to_euler(R)
    vals = synthesize_many(phi, a, b, c).real.mean(axis=1)
    vals = vals.reshape(lead)
    return float(vals.ravel()[0]) if single else vals


# ---------------------------------------------------------------------------
# image pipeline


def half_turn_x() -> GroupElement:
    """Rotation by pi about the x axis, the generator used by the symmetry relation."""
    return GroupElement.so3(math.pi, math.pi, 0.0)


def lift_image_to_so3_coeffs(img: RasterImage, N: int, oversample: int = 2) -> FourierCoefficients:
    """Fourier coefficients (degrees ``0..N``) of ``f(R) = h(R e1)``.

    ``h`` is the spherical image of ``img``.  The quadrature grid has an
    even number of alpha and gamma nodes so that it is invariant under
    right multiplication by the half-turn about the x axis; the symmetry
    relation then holds to rounding error.
    """
    table = enumerate_irreps(Group.SO3, N)
    grid = quadrature_grid(Group.SO3, N, oversample=oversample, even=True)
    cfg = HomogeneousLiftConfig(Group.SO3, (1.0, 0.0, 0.0), np.eye(3)[None])
    samples = lift_homogeneous(lambda u: image_to_sphere(img, u), cfg, grid)
    return fourier_transform(samples, grid, table)


def real_symmetry_residual(coeffs: FourierCoefficients, half_turn: bool = True) -> float:
    """Largest violation of the symmetry relations of a lifted real image.

    Reality: ``X_{-m,-m'} = (-1)^{m+m'} conj(X_{m,m'})``.  Half-turn
    invariance: ``X = D(h) X`` with ``h`` the half-turn about the x axis,
    which flips the sign of the row index up to the factor ``(-1)^j``.
    """
    h = half_turn_x()
    worst = 0.0
    for xi, X in zip(coeffs.table, coeffs.blocks):
        j = xi.label
        m = np.arange(-j, j + 1)
        sign = (-1.0) ** (m[:, None] + m[None, :])
        worst = max(worst, float(np.max(np.abs(X[::-1, ::-1] - sign * X.conj()))))
        if half_turn:
            worst = max(worst, float(np.max(np.abs(X - irrep_matrix(xi, h) @ X))))
    return worst


def symmetry_reduced_dimension(N: int, half_turn: bool = True) -> int:
    """Real dimension of coefficient blocks ``j <= N`` obeying the lifted-image relations.

    Computed as the nullity of the stacked real linear constraints.
    """
    h = half_turn_x()
    total = 0
    for j in range(N + 1):
        n = 2 * j + 1
        m = np.arange(-j, j + 1)
        sign = (-1.0) ** (m[:, None] + m[None, :])
        basis = []
        for k in range(2 * n * n):
            X = np.zeros(n * n, complex)
            X[k % (n * n)] = 1.0 if k < n * n else 1j
            X = X.reshape(n, n)
            cons = [X[::-1, ::-1] - sign * X.conj()]
            if half_turn:
                D = wigner_half_turn(j, h)
                cons.append(X - D @ X)
            v = np.concatenate([c.ravel() for c in cons])
            basis.append(np.concatenate([v.real, v.imag]))
        A = np.array(basis).T
        total += 2 * n * n - int(np.linalg.matrix_rank(A, tol=1e-9))
    return total


def wigner_half_turn(j: int, h: GroupElement) -> np.ndarray:
    return irrep_matrix(enumerate_irreps(Group.SO3, j).entries[j], h)


# ---------------------------------------------------------------------------
# rendering


def _chart_to_sphere(x, y, chart: str):
    if chart == "orthographic":
        r2 = x**2 + y**2
        return np.stack([x, y, np.sqrt(np.clip(1.0 - r2, 0.0, None))], axis=-1)
    if chart == "stereographic":
        r2 = x**2 + y**2
        return np.stack([2 * x, 2 * y, 1.0 - r2], axis=-1) / (1.0 + r2)[..., None]
    raise ValueError(f"unknown chart {chart!r}")


def render_atom(phi: FourierCoefficients, resolution: int = 28, n_frames: Optional[int] = None,
                chart: str = "stereographic", rescale: bool = True) -> RasterImage:
    """Raster image of the spherical function ``h(u) = mean phi((u | v | w))``.

    For every pixel ``(x, y)`` in ``[-s, s]^2`` the unit vector ``u`` is
    ``(x, y, sqrt(1 - x^2 - y^2))`` (``chart="orthographic"``) or the
    inverse of the image chart (``chart="stereographic"``, which inverts
    :func:`lift_image_to_so3_coeffs` exactly).  The average runs over
    ``n_frames`` equally spaced completions ``v`` on the circle orthogonal
    to ``u`` with ``w = u x v``.
    """
    N = max(phi.table.labels)
    K = 2 * N + 2 if n_frames is None else n_frames
    t = 2 * math.pi * np.arange(K) / K
    # rotations about the x axis fix e1
    c, s = np.cos(t), np.sin(t)
    S = np.zeros((K, 3, 3))
    S[:, 0, 0] = 1.0
    S[:, 1, 1] = c
    S[:, 1, 2] = -s
    S[:, 2, 1] = s
    S[:, 2, 2] = c
    cfg = HomogeneousLiftConfig(Group.SO3, (1.0, 0.0, 0.0), S)
    img = RasterImage(resolution, resolution, np.zeros((resolution, resolution)))
    X, Y = img.pixel_coordinates()
    U = _chart_to_sphere(X, Y, chart)
    vals = project_to_homogeneous(phi, cfg, U.reshape(-1, 3)).reshape(resolution, resolution)
    out = RasterImage.from_array(vals)
    return out.rescaled() if rescale else out
