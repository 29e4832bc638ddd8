import numpy as np
import pytest

from groupdict.cli import main
from groupdict.experiments import (
    ExperimentConfig,
    TIGHTNESS_THRESHOLD,
    load_mnist_digit,
    random_tightness_tensor,
    run_experiment,
    run_tightness,
    synthetic_dataset,
)
from groupdict.formats import load_coefficients, save_coefficients
from groupdict.harmonics import Group, plancherel_norm
from groupdict.learner import random_dictionary
from groupdict.lifting import RasterImage


def test_config_parsing():
    cfg = ExperimentConfig.from_text(
        "# demo\nexperiment = synthetic\nj = 2\nlam = 0.05  # small\nrefine = yes\nn-data = 7\n"
    )
    assert (cfg.experiment, cfg.j, cfg.lam, cfg.refine, cfg.n_data) == ("synthetic", 2, 0.05, True, 7)
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("bogus = 1")
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("experiment = other")
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("j 2")
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("refine = maybe")


def test_tightness_tensor_has_unit_mass(rng):
    T = random_tightness_tensor(2, 3, rng)
    assert T.shape == (3, 3, 3)
    assert T.dtype == complex


def test_tightness_single_term_is_tight():
    rep = run_tightness(1, 1, trials=4, seed=0)
    assert rep.successes == 4
    assert all(v >= TIGHTNESS_THRESHOLD for v in rep.values)
    assert len(rep.rows()) == 4


def test_synthetic_dataset_is_deterministic():
    a = synthetic_dataset(1, 5, seed=3)
    b = synthetic_dataset(1, 5, seed=3)
    assert a[0].allclose(b[0], atol=0)
    assert all(x.allclose(y, atol=0) for x, y in zip(a[1], b[1]))
    assert all(plancherel_norm(y) == pytest.approx(1.0) for y in a[1])


def test_synthetic_csv_is_byte_identical(tmp_path):
    text = "experiment = synthetic\nn_data = 6\niters = 2\nseed = 4\n"
    outs = []
    for name in ("a", "b"):
        cfg = ExperimentConfig.from_text(text + f"out_dir = {tmp_path / name}\n")
        paths = run_experiment(cfg)
        outs.append(paths["csv"].read_bytes())
        assert len(load_coefficients(paths["dictionary"])) == 1
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0].startswith(b"iteration,invariant_distance")


def test_mnist_loader(mnist_dir):
    imgs = load_mnist_digit(mnist_dir, 7, 5)
    assert len(imgs) == 5 and isinstance(imgs[0], RasterImage)
    with pytest.raises(ValueError):
        load_mnist_digit(mnist_dir, 1, 100)
    with pytest.raises(FileNotFoundError):
        load_mnist_digit(mnist_dir / "nowhere", 1, 1)


def test_cli_tightness(tmp_path, capsys):
    assert main(["tightness", "--n", "1", "--r", "1", "--trials", "2", "--out", str(tmp_path)]) == 0
    assert "successes: 2" in capsys.readouterr().out
    assert (tmp_path / "tightness_n1_r1.csv").exists()


def test_cli_mnist_and_render(mnist_dir, tmp_path):
    out = tmp_path / "run"
    assert main(["mnist", "--data-dir", str(mnist_dir), "--count", "4", "--bandwidth", "3",
                 "--iters", "1", "--out", str(out)]) == 0
    dict_path = out / "mnist_digit1_dictionary.gdfc"
    assert dict_path.exists() and (out / "mnist_digit1_atom.png").exists()
    pgm = tmp_path / "atom.pgm"
    assert main(["render", "--dict", str(dict_path), "--out", str(pgm), "--resolution", "12"]) == 0
    data = pgm.read_bytes()
    assert data.startswith(b"P5")
    assert max(data[-144:]) > 0


def test_cli_render_rejects_non_so3(tmp_path, rng):
    from groupdict.harmonics import enumerate_irreps

    path = tmp_path / "so2.gdfc"
    save_coefficients(path, list(random_dictionary(enumerate_irreps(Group.SO2, 2), 1, rng).atoms))
    assert main(["render", "--dict", str(path), "--out", str(tmp_path / "x.png")]) == 2


def test_cli_fit_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"experiment = tightness\ntrials = 1\nout_dir = {tmp_path}\n")
    assert main(["fit", "--config", str(cfg)]) == 0
    assert "csv:" in capsys.readouterr().out
