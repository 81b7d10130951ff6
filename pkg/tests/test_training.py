import json

import numpy as np
import pytest

from imdd_snn import equalizers as eqz
from imdd_snn import link, neural, training

A = link.preset_channel("A")


def small(kind="SNN_DFE", **kw):
    opts = dict(channel=A, kind=kind, batches=4, batch_symbols=1000, n_hidden=8, T=6, seed=11)
    opts.update(kw)
    return training.TrainConfig(**opts)


def test_config_defaults_and_validation():
    cfg = training.TrainConfig(channel=A)
    assert (cfg.lr, cfg.batches, cfg.batch_symbols, cfg.sigma2_db_train) == (1e-3, 200, 10_000, -17.0)
    assert cfg.n_hidden == 40
    assert training.TrainConfig(channel=link.preset_channel("B")).n_hidden == 80
    for bad in (dict(lr=-1.0), dict(batches=0), dict(batch_symbols=170), dict(kind="XYZ"), dict(steps_per_batch=3)):
        with pytest.raises(ValueError):
            training.TrainConfig(channel=A, **bad)


def test_config_dict_roundtrip():
    cfg = small(lif=neural.LifParams(tau_m=8.0))
    assert training.TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_batches_are_deterministic_and_teacher_forced():
    cfg = small()
    b1, b2 = training.make_batch(cfg, 3), training.make_batch(cfg, 3)
    np.testing.assert_array_equal(b1.feedforward, b2.feedforward)
    np.testing.assert_array_equal(b1.labels, b2.labels)
    assert not np.array_equal(b1.feedforward, training.make_batch(cfg, 4).feedforward)
    assert b1.feedback_source == "truth"
    np.testing.assert_array_equal(b1.feedback[1:, 0], b1.labels[:-1])
    assert b1.feedforward.shape == (1000, 9) and b1.feedback.shape == (1000, 8)


def test_nf_batches_use_centered_windows():
    b = training.make_batch(small("NF_SNN"), 0)
    assert b.feedforward.shape == (1000, 17) and b.feedback.shape == (1000, 0)


def test_split_batch_covers_the_batch():
    b = training.make_batch(small(), 0)
    parts = list(training.split_batch(b, 4))
    np.testing.assert_array_equal(np.concatenate([p.labels for p in parts]), b.labels)


def test_learning_rate_schedule():
    cfg = small(lr=1e-2, lr_final=1e-4)
    assert training.learning_rate(cfg, 0, 100) == pytest.approx(1e-2)
    assert training.learning_rate(cfg, 99, 100) == pytest.approx(1e-4)
    assert training.learning_rate(small(lr=3e-3), 50, 100) == 3e-3


@pytest.mark.parametrize("kind", ["SNN_DFE", "NF_SNN", "ANN_DFE", "NF_ANN"])
def test_training_is_deterministic(kind, tmp_path):
    cfg = small(kind, lr=1e-2)
    _, r1 = training.train(cfg, checkpoint=tmp_path / "a.json")
    _, r2 = training.train(cfg, checkpoint=tmp_path / "b.json")
    assert r1.loss_trace == r2.loss_trace
    assert len(r1.loss_trace) == cfg.batches and all(np.isfinite(r1.loss_trace))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    report = json.loads((tmp_path / "a.json.report.json").read_text())
    assert report["config"]["kind"] == kind and len(report["loss_trace"]) == cfg.batches


def test_zero_learning_rate_leaves_parameters_unchanged():
    cfg = small(lr=0.0)
    eq, rep = training.train(cfg)
    init = training.init_model(cfg)
    np.testing.assert_array_equal(eq.payload.W_in, init.W_in)
    np.testing.assert_array_equal(eq.payload.W_out, init.W_out)


def test_training_reduces_loss():
    cfg = small("ANN_DFE", batches=30, lr=1e-2, steps_per_batch=5)
    _, rep = training.train(cfg)
    assert np.mean(rep.loss_trace[-5:]) < np.mean(rep.loss_trace[:5])


def test_nonfinite_training_aborts(monkeypatch):
    def poisoned(model, batch, chunk):
        grads = {k: np.full_like(v, np.nan) for k, v in model.params().items()}
        return float("nan"), grads, 0

    monkeypatch.setattr(training, "loss_and_grads", poisoned)
    with pytest.raises(training.TrainingDiverged):
        training.train(small())


def test_linear_fit_through_train():
    eq, rep = training.train(small("LMMSE", pilot_symbols=5000))
    assert eq.kind == "LMMSE" and eq.spec == eqz.nf_spec(17)
    eq, _ = training.train(small("CDFE", pilot_symbols=5000))
    assert eq.spec == eqz.window_spec(17) and eq.payload.feedback.size == 8


@pytest.mark.parametrize("kind", ["SNN_DFE", "ANN_DFE", "CDFE", "NF_SNN"])
def test_checkpoint_roundtrip_gives_identical_decisions(kind, tmp_path):
    cfg = small(kind, lr=1e-2, pilot_symbols=5000)
    eq, _ = training.train(cfg)
    path = training.save_checkpoint(eq, cfg, tmp_path / "ck.json")
    back = training.load_checkpoint(path)
    assert back.kind == eq.kind and back.spec == eq.spec
    rx = link.simulate_link(link.random_classes(500, np.random.default_rng(0)), A, -18.0, np.random.default_rng(1)).rx_symbols
    np.testing.assert_array_equal(eqz.equalize_stream(back, rx), eqz.equalize_stream(eq, rx))
    if kind in ("SNN_DFE", "NF_SNN"):
        np.testing.assert_array_equal(back.payload.W_in, eq.payload.W_in)
        assert back.payload.scale == eq.payload.scale


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(training.CheckpointError):
        training.load_checkpoint(bad)
    eq, _ = training.train(small("LMMSE", pilot_symbols=5000))
    path = training.save_checkpoint(eq, None, tmp_path / "ok.json")
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(training.CheckpointError):
        training.load_checkpoint(path)
    doc["version"] = training.CHECKPOINT_VERSION
    doc["window"] = [3, 0]
    path.write_text(json.dumps(doc))
    with pytest.raises(eqz.LayoutError):
        training.load_checkpoint(path)


def test_geometry_check():
    eq, _ = training.train(small("LMMSE", pilot_symbols=5000))
    training.check_geometry(eq, A)
    with pytest.raises(eqz.LayoutError):
        training.check_geometry(eq, link.preset_channel("B"))
