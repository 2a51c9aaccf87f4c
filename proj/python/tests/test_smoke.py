import numpy as np
import pytest

import mygo


def small_settings(data, out, **extra):
    settings = {
        "data": data,
        "out": out,
        "dim": 16,
        "heads": 2,
        "m": 3,
        "n": 2,
        "epochs": 2,
        "batch_size": 32,
        "dropout": 0.0,
    }
    settings.update(extra)
    return settings


def test_version():
    assert mygo.version() == mygo.__version__


def test_gradcheck_passes():
    report = mygo.gradcheck()
    assert report["max_rel_error"] < 1e-4
    assert "tucker.core" in report["groups"]


def test_gradcheck_rejects_dropout():
    with pytest.raises(mygo.NumericError):
        mygo.gradcheck({"dropout": 0.2})


def test_pipeline(tmp_path):
    data = tmp_path / "data"
    mygo.synth(data, seed=3, valid=5, test=5)
    prep = mygo.prepare(small_settings(str(data), str(tmp_path / "prep")))
    assert 0.0 < prep["textual_coverage"] <= 1.0

    run = mygo.train(small_settings(str(data), str(tmp_path / "run")))
    assert len(run["log"]) == 4
    epoch, step, kgc, con, total = run["log"][-1]
    assert (epoch, step) == (2, 4)
    assert total == pytest.approx(kgc + 0.01 * con, rel=1e-5)

    ckpt = mygo.load_checkpoint(run["last_checkpoint"])
    assert ckpt["step"] == 4
    assert ckpt["params"]["tucker.core"].shape == (16, 16, 16)
    assert ckpt["params"]["tucker.core"].dtype == np.float32
    assert "dim = 16" in ckpt["config"]

    metrics = mygo.evaluate({"data": str(data), "out": str(tmp_path / "eval")}, run["last_checkpoint"], "test")
    assert metrics["triples"] == 5
    both = metrics["filtered"]["both"]
    assert 0.0 < both["mrr"] <= 1.0
    assert both["hits1"] <= both["hits3"] <= both["hits10"]
    assert both["mrr"] >= metrics["raw"]["both"]["mrr"]


def test_errors(tmp_path):
    with pytest.raises(mygo.ConfigError):
        mygo.train({"bogus": 1})
    with pytest.raises(mygo.DataError):
        mygo.train({"data": str(tmp_path / "missing"), "out": str(tmp_path)})
    assert issubclass(mygo.DataError, mygo.MygoError)
