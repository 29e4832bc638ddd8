"""Command-line entry point: ``groupdict <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import ExperimentConfig, run_experiment
from .formats import load_coefficients


def _common(p):
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupdict", description="Group-invariant dictionary learning.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tightness", help="relaxed tensor norms of random unit-mass tensors")
    p.add_argument("--n", type=int, default=1, help="mode size minus one")
    p.add_argument("--r", type=int, default=1, help="terms per tensor")
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--structure", default="toeplitz", choices=["toeplitz", "per-mode-conjugate"])
    _common(p)

    p = sub.add_parser("synthetic", help="recover one SO(3) atom from rotated copies")
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--n-data", type=int, default=50)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--refine", action="store_true", help="long local refinement of the final distance")
    p.add_argument("--plot", action="store_true", help="also write a PNG line plot")
    _common(p)

    p = sub.add_parser("mnist", help="learn one SO(3) atom from MNIST digits")
    p.add_argument("--digit", type=int, default=1)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--bandwidth", type=int, default=6)
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--data-dir", default=".")
    _common(p)

    p = sub.add_parser("render", help="render SO(3) atoms of a coefficient container")
    p.add_argument("--dict", required=True, help="coefficient container file")
    p.add_argument("--out", required=True, help="output .png or .pgm; an index is appended for several atoms")
    p.add_argument("--resolution", type=int, default=28)
    p.add_argument("--chart", default="stereographic", choices=["stereographic", "orthographic"])

    p = sub.add_parser("fit", help="run an experiment described by a key = value file")
    p.add_argument("--config", required=True)
    return parser


def _render(args) -> int:
    from .harmonics import Group
    from .lifting import render_atom

    atoms = load_coefficients(args.dict)
    out = Path(args.out)
    for k, phi in enumerate(atoms):
        if phi.table.group is not Group.SO3:
            print(f"atom {k} is not an SO(3) function", file=sys.stderr)
            return 2
        img = render_atom(phi, args.resolution, chart=args.chart)
        path = out if len(atoms) == 1 else out.with_name(f"{out.stem}_{k}{out.suffix}")
        if path.suffix.lower() == ".pgm":
            img.write_pgm(path)
        else:
            img.write_png(path)
        print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "render":
        return _render(args)
    if args.command == "fit":
        cfg = ExperimentConfig.from_file(args.config)
    elif args.command == "tightness":
        cfg = ExperimentConfig(experiment="tightness", n=args.n, r=args.r, trials=args.trials,
                               structure=args.structure, seed=args.seed, out_dir=args.out)
    elif args.command == "synthetic":
        cfg = ExperimentConfig(experiment="synthetic", j=args.j, n_data=args.n_data, lam=args.lam,
                               iters=args.iters, refine=args.refine, plot=args.plot, seed=args.seed,
                               out_dir=args.out)
    else:
        cfg = ExperimentConfig(experiment="mnist", digit=args.digit, count=args.count,
                               bandwidth=args.bandwidth, iters=args.iters, data_dir=args.data_dir,
                               seed=args.seed, out_dir=args.out)
    paths = run_experiment(cfg)
    for key, val in paths.items():
        print(f"{key}: {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
