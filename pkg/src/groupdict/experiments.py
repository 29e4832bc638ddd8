"""Experiment drivers: relaxation tightness, synthetic SO(3) recovery, MNIST."""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .conic import SolverError
from .formats import parse_idx, parse_idx_labels, save_coefficients, write_csv
from .harmonics import FourierCoefficients, Group, GroupElement, IrrepTable, act_left_regular
from .learner import (
    Dictionary,
    FitConfig,
    fit,
    fit_baseline_l1,
    normalize,
    pair_distance,
)
from .lifting import RasterImage, lift_image_to_so3_coeffs, render_atom
from .orbitope import caratheodory_vector, tensor_minkowski_relaxed

__all__ = [
    "TIGHTNESS_THRESHOLD",
    "TightnessReport",
    "ExperimentConfig",
    "SyntheticResult",
    "MnistResult",
    "random_tightness_tensor",
    "run_tightness",
    "synthetic_dataset",
    "run_synthetic_so3",
    "find_mnist_files",
    "load_mnist_digit",
    "run_mnist",
    "run_experiment",
]

log = logging.getLogger(__name__)

TIGHTNESS_THRESHOLD = 1.0 - 1e-4


# ---------------------------------------------------------------------------
# tightness


@dataclass(frozen=True)
class TightnessReport:
    """Relaxed norms of random unit-mass tensors.

    A trial succeeds when its value is at least ``1 - 1e-4``; solver
    failures are counted separately and carry ``nan`` values.
    """

    n: int
    r: int
    trials: int
    seed: int
    values: tuple
    structure: str = "toeplitz"

    @property
    def successes(self) -> int:
        return int(sum(1 for v in self.values if np.isfinite(v) and v >= TIGHTNESS_THRESHOLD))

    @property
    def solver_failures(self) -> int:
        return int(sum(1 for v in self.values if not np.isfinite(v)))

    def rows(self):
        return [(k, self.n, self.r, float(v), int(np.isfinite(v) and v >= TIGHTNESS_THRESHOLD))
                for k, v in enumerate(self.values)]


def random_tightness_tensor(n: int, r: int, rng) -> np.ndarray:
    """``sum_i (1/r) e^{i t_i} v(a_i) (x) v(b_i) (x) v(c_i)`` with uniform angles.

    Each term draws its own phase ``t_i``.
    """
    T = np.zeros((n + 1,) * 3, complex)
    for _ in range(r):
        t, a, b, c = rng.uniform(0.0, 2 * math.pi, 4)
        T += np.exp(1j * t) / r * np.einsum(
            "i,j,k->ijk", caratheodory_vector(a, n), caratheodory_vector(b, n), caratheodory_vector(c, n)
        )
    return T


def _tightness_trial(args):
    T, n, structure = args
    try:
        return tensor_minkowski_relaxed(T, n, structure=structure)
    except SolverError as exc:
        log.warning("tightness trial failed: %s", exc)
        return math.nan


def run_tightness(n: int, r: int, trials: int = 25, seed: int = 0, structure: str = "toeplitz",
                  n_jobs: int = 1) -> TightnessReport:
    """Relaxed tensor norm of ``trials`` random ``r``-term tensors of mode size ``n + 1``."""
    if n < 1 or r < 1 or trials < 1:
        raise ValueError("n, r and trials must be positive")
    rng = np.random.default_rng(seed)
    tensors = [random_tightness_tensor(n, r, rng) for _ in range(trials)]
    jobs = [(T, n, structure) for T in tensors]
    if n_jobs != 1:
        from joblib import Parallel, delayed

        values = Parallel(n_jobs=n_jobs)(delayed(_tightness_trial)(a) for a in jobs)
    else:
        values = [_tightness_trial(a) for a in jobs]
    return TightnessReport(n, r, trials, seed, tuple(float(v) for v in values), structure)


# ---------------------------------------------------------------------------
# synthetic recovery


@dataclass
class SyntheticResult:
    """Distance traces of the invariant learner and the plain baselines."""

    j: int
    generator: FourierCoefficients
    dictionary: Dictionary
    invariant_distance: list
    coding_objective: list
    baseline: dict = field(default_factory=dict)  # q -> list of (min, mean, max)
    refined_distance: float = math.nan

    @property
    def final_distance(self) -> float:
        return self.invariant_distance[-1]

    def rows(self):
        out = []
        for k, d in enumerate(self.invariant_distance):
            row = [k + 1, d, self.coding_objective[k]]
            for q in sorted(self.baseline):
                trace = self.baseline[q]
                row.extend(trace[k] if k < len(trace) else (math.nan,) * 3)
            out.append(row)
        return out

    def header(self):
        h = ["iteration", "invariant_distance", "coding_objective"]
        for q in sorted(self.baseline):
            h.extend([f"baseline_q{q}_min", f"baseline_q{q}_mean", f"baseline_q{q}_max"])
        return h


def synthetic_dataset(j: int, n_data: int, seed: int = 0):
    """Generator atom and data ``phi* D(g_i)^*`` with Haar-random ``g_i`` (degree ``j`` only)."""
    rng = np.random.default_rng(seed)
    table = IrrepTable.from_labels(Group.SO3, [j])
    star = normalize([FourierCoefficients.random(table, rng)])[0]
    data = [act_left_regular(star, GroupElement.random(Group.SO3, rng)) for _ in range(n_data)]
    return star, data


def run_synthetic_so3(j: int = 1, n_data: int = 50, lam: float = 0.1, iters: int = 15, seed: int = 0,
                      baseline_q=(1, 5), refine: bool = False, distance_grid=(24, 12, 24),
                      callback=None) -> SyntheticResult:
    """Recover a single SO(3) atom from rotated copies, plus plain baselines.

    ``refine`` also computes the final distance with the long local refinement.
    """
    star, data = synthetic_dataset(j, n_data, seed)
    cfg = FitConfig(q=1, lam=lam, iterations=iters, mode="so3_sdp", seed=seed + 1,
                    distance_grid=tuple(distance_grid))
    dictionary, trace, _ = fit(data, cfg, reference=[star], callback=callback)
    res = SyntheticResult(j, star, dictionary, list(trace.distance), list(trace.coding_objective))
    Y = np.array([y.real_vector() for y in data])
    table = star.table
    for q in baseline_q:
        dists = []

        def record(it, Phi, _trace, dists=dists):
            d = [pair_distance(FourierCoefficients.from_real_vector(table, Phi[:, k]), star, distance_grid)
                 for k in range(Phi.shape[1])]
            dists.append((float(np.min(d)), float(np.mean(d)), float(np.max(d))))

        fit_baseline_l1(Y, q, lam, iters, seed=seed + 2, callback=record)
        res.baseline[q] = dists
    if refine:
        res.refined_distance = pair_distance(dictionary[0], star, distance_grid, refine=True)
    return res


# ---------------------------------------------------------------------------
# MNIST


def find_mnist_files(data_dir) -> tuple:
    """Paths of the training images and labels, plain or gzipped."""
    data_dir = Path(data_dir)
    found = []
    for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        for cand in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
            if (data_dir / cand).exists():
                found.append(data_dir / cand)
                break
        else:
            raise FileNotFoundError(f"{stem} not found in {data_dir}")
    return tuple(found)


def load_mnist_digit(data_dir, digit: int, count: int) -> List[RasterImage]:
    """First ``count`` training images showing ``digit``."""
    if not 0 <= digit <= 9:
        raise ValueError("digit must be in 0..9")
    img_path, lab_path = find_mnist_files(data_dir)
    images = parse_idx(img_path)
    labels = parse_idx_labels(lab_path)
    if len(images) != len(labels):
        raise ValueError("image and label counts differ")
    idx = np.flatnonzero(labels == digit)[:count]
    if idx.size < count:
        raise ValueError(f"only {idx.size} images of digit {digit} available")
    return [images[k] for k in idx]


@dataclass
class MnistResult:
    dictionary: Dictionary
    image: RasterImage
    coding_objective: list
    codes: list


def run_mnist(digit: int = 1, n_images: int = 20, N: int = 6, iters: int = 3, seed: int = 0,
              data_dir=None, images: Optional[List[RasterImage]] = None, sweeps: int = 5,
              coding_grid=(16, 8, 16), resolution: int = 28, callback=None) -> MnistResult:
    """Learn one SO(3) atom from lifted digit images and render it.

    Either ``images`` or ``data_dir`` (holding the MNIST training files)
    must be given.
    """
    if images is None:
        if data_dir is None:
            raise ValueError("give data_dir or images")
        images = load_mnist_digit(data_dir, digit, n_images)
    data = [lift_image_to_so3_coeffs(img, N) for img in images]
    cfg = FitConfig(q=1, lam=0.0, iterations=iters, mode="so3_one_sparse", seed=seed,
                    coding_grid=tuple(coding_grid), sweeps=sweeps)
    dictionary, trace, codes = fit(data, cfg, callback=callback)
    img = render_atom(dictionary[0], resolution)
    return MnistResult(dictionary, img, list(trace.coding_objective), codes)


# ---------------------------------------------------------------------------
# config-driven runs


@dataclass
class ExperimentConfig:
    """Flat settings of one experiment; ``seed`` determines every random draw."""

    experiment: str = "synthetic"
    seed: int = 0
    out_dir: str = "out"
    # tightness
    n: int = 1
    r: int = 1
    trials: int = 25
    structure: str = "toeplitz"
    # synthetic
    j: int = 1
    n_data: int = 50
    lam: float = 0.1
    iters: int = 15
    refine: bool = False
    # mnist
    digit: int = 1
    count: int = 20
    bandwidth: int = 6
    data_dir: str = "."
    sweeps: int = 5
    plot: bool = False

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            kind = types[key]
            if kind in ("int", int):
                values[key] = int(val)
            elif kind in ("float", float):
                values[key] = float(val)
            elif kind in ("bool", bool):
                if val.lower() not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(f"line {lineno}: bad boolean {val!r}")
                values[key] = val.lower() in ("1", "true", "yes")
            else:
                values[key] = val
        cfg = cls(**values)
        if cfg.experiment not in ("tightness", "synthetic", "mnist"):
            raise ValueError(f"unknown experiment {cfg.experiment!r}")
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())


def _plot_lines(path, x, series: dict, ylabel: str, logy: bool = True) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, ys in series.items():
        ax.plot(x, ys, marker="o", label=name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run ``cfg`` and write its artifacts into ``cfg.out_dir``; returns output paths."""
    out = Path(cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    paths = {}
    if cfg.experiment == "tightness":
        rep = run_tightness(cfg.n, cfg.r, cfg.trials, cfg.seed, cfg.structure)
        p = out / f"tightness_n{cfg.n}_r{cfg.r}.csv"
        write_csv(p, ("trial", "n", "r", "value", "success"), rep.rows())
        paths["csv"] = p
        paths["successes"] = rep.successes
    elif cfg.experiment == "synthetic":
        res = run_synthetic_so3(cfg.j, cfg.n_data, cfg.lam, cfg.iters, cfg.seed, refine=cfg.refine)
        p = out / f"synthetic_j{cfg.j}.csv"
        write_csv(p, res.header(), res.rows())
        paths["csv"] = p
        d = out / f"synthetic_j{cfg.j}_dictionary.gdfc"
        save_coefficients(d, list(res.dictionary.atoms))
        paths["dictionary"] = d
        if cfg.plot:
            x = list(range(1, len(res.invariant_distance) + 1))
            series = {"invariant": res.invariant_distance}
            for q, tr in res.baseline.items():
                series[f"baseline q={q} (min)"] = [t[0] for t in tr]
            p = out / f"synthetic_j{cfg.j}.png"
            _plot_lines(p, x, series, "distance to generator")
            paths["plot"] = p
    else:
        res = run_mnist(cfg.digit, cfg.count, cfg.bandwidth, cfg.iters, cfg.seed,
                        data_dir=cfg.data_dir, sweeps=cfg.sweeps)
        rows = [(k + 1, v) for k, v in enumerate(res.coding_objective)]
        p = out / f"mnist_digit{cfg.digit}.csv"
        write_csv(p, ("iteration", "coding_objective"), rows)
        paths["csv"] = p
        d = out / f"mnist_digit{cfg.digit}_dictionary.gdfc"
        save_coefficients(d, list(res.dictionary.atoms))
        paths["dictionary"] = d
        res.image.write_pgm(out / f"mnist_digit{cfg.digit}_atom.pgm")
        res.image.write_png(out / f"mnist_digit{cfg.digit}_atom.png")
        paths["image"] = out / f"mnist_digit{cfg.digit}_atom.png"
    return paths
