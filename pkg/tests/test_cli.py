import csv
import subprocess
import sys

import numpy as np
import pytest

from tsviz.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USER, load_config, main
from tsviz.imageio import read_pgm, write_ppm

TINY = """\
# small end-to-end run
num_classes = 3
per_class = 4
image_size = 16
channels = 4, 8
fc_width = 8
learning_rate = 0.01
epochs = 1
batch_size = 4
images = 3
max_entries = 2
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(TINY)
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def test_config_parsing(config):
    cfg = load_config(config, {"seed": 9, "method": None})
    assert cfg.channels == [4, 8] and cfg.seed == 9 and cfg.method == "all"
    assert cfg.clip_norm is None and cfg.learning_rate == 0.01


def test_unknown_key_is_a_user_error(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = green\n")
    assert run("generate", "--config", bad, "--out", tmp_path / "o") == EXIT_USER
    err = capsys.readouterr().err
    assert "colour" in err and "Traceback" not in err


def test_unparsable_value(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("epochs = many\n")
    assert run("train", "--config", bad, "--out", tmp_path / "o") == EXIT_USER


def test_missing_inputs(tmp_path, config, capsys):
    assert run("train", "--config", config, "--out", tmp_path / "o") == EXIT_USER
    assert "tsviz generate" in capsys.readouterr().err
    assert run("evaluate", "--config", config, "--out", tmp_path / "o") == EXIT_USER
    assert run("generate", "--config", tmp_path / "nope.cfg") == EXIT_USER


def test_invalid_network_config(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text(TINY.replace("image_size = 16", "image_size = 18"))
    assert run("generate", "--config", bad, "--out", tmp_path / "o") == EXIT_OK
    assert run("train", "--config", bad, "--out", tmp_path / "o") == EXIT_USER


def test_generate_is_deterministic(tmp_path, config):
    for d in ("a", "b"):
        assert run("generate", "--config", config, "--seed", 7, "--out", tmp_path / d) == EXIT_OK
    ma = (tmp_path / "a" / "data" / "manifest.csv").read_bytes()
    assert ma == (tmp_path / "b" / "data" / "manifest.csv").read_bytes()
    img = "data/disease1/disease1_00000.ppm"
    assert (tmp_path / "a" / img).read_bytes() == (tmp_path / "b" / img).read_bytes()


def test_full_pipeline(tmp_path, config, capsys):
    out = tmp_path / "run"
    assert run("generate", "--config", config, "--out", out) == EXIT_OK
    assert run("train", "--config", config, "--out", out) == EXIT_OK
    assert (out / "model.tsvz").exists()
    with open(out / "train.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1

    assert run("visualize", "--config", config, "--out", out) == EXIT_OK
    for method in ("proposed", "gradient", "gradcam"):
        pgms = sorted((out / "heatmaps" / method).glob("*.pgm"))
        assert len(pgms) == 6  # 3 heatmaps + 3 masks

    assert run("evaluate", "--config", config, "--out", out, "--method", "gradient",
               "--f-class", "label") == EXIT_OK
    assert (out / "eval" / "gradient.curve.csv").exists()
    assert not (out / "eval" / "proposed.curve.csv").exists()

    capsys.readouterr()
    assert run("compare", "--config", config, "--out", out) == EXIT_OK
    table = capsys.readouterr().out
    assert "proposed" in table and "gradcam" in table
    with open(out / "compare.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["proposed", "gradient", "gradcam"]

    # checkpoint trained for another network shape
    other = tmp_path / "other.cfg"
    other.write_text(TINY.replace("fc_width = 8", "fc_width = 6"))
    assert run("visualize", "--config", other, "--out", out) == EXIT_USER


def test_visualize_single_image(tmp_path, config, capsys):
    out = tmp_path / "run"
    run("generate", "--config", config, "--out", out)
    run("train", "--config", config, "--out", out)
    write_ppm(np.zeros((16, 16, 3)), tmp_path / "black.ppm")
    assert run("visualize", "--config", config, "--out", out, "--method", "proposed",
               "--image", tmp_path / "black.ppm") == EXIT_OK
    h = read_pgm(out / "heatmaps" / "proposed" / "black.pgm")
    assert h.shape == (16, 16) and "mean heatmap" in capsys.readouterr().out
    write_ppm(np.zeros((8, 8, 3)), tmp_path / "small.ppm")
    assert run("visualize", "--config", config, "--out", out, "--image", tmp_path / "small.ppm") == EXIT_USER


def test_gradcheck_command(tmp_path, config, capsys):
    assert run("gradcheck", "--config", config, "--out", tmp_path / "g") == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_gradcheck_failure_exit_code(tmp_path):
    cfg = tmp_path / "strict.cfg"
    cfg.write_text(TINY + "tolerance = 1e-30\n")
    assert run("gradcheck", "--config", cfg, "--out", tmp_path / "g") == EXIT_NUMERIC


def test_entry_point_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tsviz.cli", "generate", "--out", str(tmp_path / "x"),
                           "--config", str(tmp_path / "missing.cfg")], capture_output=True, text=True)
    assert proc.returncode == EXIT_USER and "Traceback" not in proc.stderr
