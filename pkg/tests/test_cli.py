import csv
import io
import json

import numpy as np
import pytest

from lgmstd.cli import main


def run(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_scale_constant_examples(capsys):
    rc, out, err = run(capsys, "scale-constant", "--family", "rw1", "--K", "25")
    assert rc == 0 and out.strip() == "4.160"
    assert err.startswith("# config ")
    rc, out, _ = run(capsys, "scale-constant", "--family", "rw2", "--K", "100")
    assert float(out) == pytest.approx(2381.19, abs=5e-3)


def test_invalid_spec_exits_2(capsys):
    rc, _, err = run(capsys, "scale-constant", "--family", "rw1", "--K", "3", "--order", "2")
    assert rc == 2 and "TooFewLevels" in err


def test_geometric_mean_flag(capsys):
    rc, out, _ = run(capsys, "scale-constant", "--family", "rw1", "--K", "25",
                     "--geometric-mean")
    assert rc == 0 and "3.77" in out


def test_qmod_json(capsys):
    rc, out, _ = run(capsys, "qmod", "--K", "10", "--order", "2")
    doc = json.loads(out)
    assert rc == 0
    assert {"K", "order", "lambda_hat", "kl_value", "iterations", "Q_tilde", "S_tilde"} <= set(doc)
    Q = np.array(doc["Q_tilde"])
    S = np.array(doc["S_tilde"])
    assert Q.shape == (10, 10) and np.abs(Q @ S).max() < 1e-8 * np.abs(Q).max()


def test_implied_prior_integrates_to_one(capsys):
    rc, out, _ = run(capsys, "implied-prior", "--prior", "ig", "--C", "4.16", "--grid", "500")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rc == 0 and len(rows) == 500
    phi = np.array([float(r["phi"]) for r in rows])
    dens = np.array([float(r["density"]) for r in rows])
    assert np.trapezoid(dens, phi) == pytest.approx(1, abs=1e-3)


def test_table_check_passes(capsys):
    rc, out, _ = run(capsys, "table-h", "--check")
    assert rc == 0 and len(out.strip().splitlines()) == 15


def test_sample_effect_is_seeded(capsys):
    args = ("sample-effect", "--family", "rw1", "--K", "5", "--n", "3", "--seed", "4")
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    assert a == b and a.startswith("draw,x,f")


def test_simulate_is_reproducible(tmp_path, capsys):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        rc = main(["simulate", "--study", "s51", "--reps", "2", "--seed", "7",
                   "--priors", "vp", "--out", str(path)])
        assert rc == 0
        outs.append(path.read_text())
        assert (tmp_path / f"{name}.config.json").exists()
    capsys.readouterr()
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0].startswith("replicate,arm,phi_true")


def test_fit_data_file(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("x,y\n1,0.1\n2,0.5\n3,-0.2\n4,0.3\n5,1.0\n")
    rc, out, _ = run(capsys, "fit", "--data", str(data), "--K", "5")
    doc = json.loads(out)
    assert rc == 0 and 0 < doc["phi"]["lower90"] < doc["phi"]["mean"] < doc["phi"]["upper90"] < 1


def test_numerical_failure_exits_3(capsys):
    # a centred linear effect on 1..3 has zero conditional variance at x = 2
    rc, _, err = run(capsys, "scale-constant", "--family", "linear", "--K", "3",
                     "--geometric-mean")
    assert rc == 3 and "ZeroConditionalVariance" in err


def test_study_aliases():
    from lgmstd.study import SimulationConfig
    assert SimulationConfig(study="s52").study == "spline"
    assert SimulationConfig(study="s51").K == 25
