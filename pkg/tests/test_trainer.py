import json

import numpy as np
import pytest

from polyloss import losses as L
from polyloss import trainer as T

BLOBS = {"generator": "blobs", "k": 2, "n_per_class": 100, "d": 2, "separation": 4.0}
IMBALANCED = {"generator": "imbalanced", "n_majority": 200, "n_minority": 20, "overlap": 1.0, "d": 2}


def cfg(**kw):
    base = dict(dataset=BLOBS, steps=200, eval_every=50)
    base.update(kw)
    return T.TrainConfig(**base)


class TestTrain:
    def test_separable_accuracy(self):
        rec = T.train(cfg(steps=2000, eval_every=500))
        assert rec.final["train_accuracy"] > 0.95

    def test_eval_schedule(self):
        rec = T.train(cfg(steps=120, eval_every=50))
        assert [e["step"] for e in rec.per_eval] == [0, 50, 100, 120]

    def test_deterministic(self):
        a = T.train(cfg(seed=3)).to_dict()
        b = T.train(cfg(seed=3)).to_dict()
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_poly1_zero_bit_identical_to_ce(self):
        a = T.train(cfg(loss=L.LossSpec(L.CE)))
        b = T.train(cfg(loss=L.LossSpec(L.POLY1_CE, eps1=0.0)))
        assert a.per_eval == b.per_eval
        assert a.final == b.final

    def test_gradient_fraction_is_mean_pt(self):
        rec = T.train(cfg())
        for e in rec.per_eval:
            assert e["gradient_fraction_first_term"] == pytest.approx(e["mean_pt_overall"], abs=1e-15)

    @pytest.mark.parametrize("loss", [
        L.LossSpec(L.FOCAL, gamma=2.0), L.LossSpec(L.DROP, n=2), L.LossSpec(L.EXP, n=3),
        L.LossSpec(L.DROP_STAR, alpha=8.0), L.LossSpec(L.POLY1_STAR_FL, eps2=0.5, gamma=2.0),
    ])
    def test_all_families_finite(self, loss):
        rec = T.train(cfg(loss=loss, dataset=IMBALANCED))
        assert all(np.isfinite(e["train_loss"]) for e in rec.per_eval)

    def test_sigmoid_head(self):
        rec = T.train(cfg(model=T.LINEAR_SIGMOID, loss=L.LossSpec(L.POLY1_FL, eps1=1.0, gamma=2.0),
                          alpha_balance=0.25))
        assert rec.final["train_accuracy"] > 0.9

    def test_smoothed_head(self):
        rec = T.train(cfg(loss=L.LossSpec(L.POLY1_CE, eps1=1.0), smoothing=0.1))
        assert rec.final["train_accuracy"] > 0.9

    def test_divergence_reported(self):
        with pytest.raises(T.TrainingDiverged) as exc:
            T.train(cfg(learning_rate=1e308, loss=L.LossSpec(L.DROP_STAR, alpha=8.0)))
        assert exc.value.diagnostic["step"] >= 1
        assert exc.value.diagnostic["config"]["learning_rate"] == 1e308


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"learning_rate": 0.0}, {"weight_decay": -1.0}, {"batch_size": 0}, {"steps": 1.5},
        {"model": "mlp"}, {"smoothing": 0.1, "model": T.LINEAR_SIGMOID},
        {"alpha_balance": 0.25}, {"smoothing": 0.1, "loss": L.LossSpec(L.FOCAL, gamma=2.0)},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)

    def test_round_trip(self):
        c = cfg(loss=L.LossSpec(L.POLY1_CE, eps1=2.0))
        assert T.TrainConfig.from_dict(c.to_dict()) == c

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            T.TrainConfig.from_dict({"momentum": 0.9})


class TestSGD:
    def test_weight_decay_exact(self):
        m = T.LinearModel(3, 2)
        m.W[:] = np.arange(6.0).reshape(3, 2)
        m.b[:] = [1.0, -2.0]
        W0, b0 = m.W.copy(), m.b.copy()
        m.sgd_step(np.zeros((4, 3)), np.zeros((4, 2)), lr=0.1, weight_decay=0.01)
        assert np.array_equal(m.W, W0 * (1 - 0.1 * 0.01))
        assert np.array_equal(m.b, b0 * (1 - 0.1 * 0.01))


class TestSweep:
    def test_seeds_xor_index(self):
        base = cfg(seed=5, loss=L.LossSpec(L.POLY1_CE, eps1=0.0))
        configs = T.sweep_configs(base, "eps1", [0.0, 1.0, 2.0])
        assert [c.seed for c in configs] == [5, 4, 7]
        assert [c.loss.eps1 for c in configs] == [0.0, 1.0, 2.0]

    def test_empty(self):
        assert T.sweep(cfg(), "learning_rate", []) == []

    def test_unknown_param(self):
        with pytest.raises(ValueError):
            T.sweep_configs(cfg(), "momentum", [0.9])

    def test_parallel_matches_serial(self):
        base = cfg(steps=50, loss=L.LossSpec(L.POLY1_CE, eps1=0.0))
        serial = [r.to_dict() for r in T.sweep(base, "eps1", [0.0, 1.0])]
        parallel = [r.to_dict() for r in T.sweep(base, "eps1", [0.0, 1.0], jobs=2)]
        assert serial == parallel


class TestImbalanceReport:
    def test_gap_positive_for_ce(self):
        rec = T.train(cfg(dataset=IMBALANCED, steps=500, eval_every=250))
        rows = T.imbalance_report(rec)
        assert rows[-1]["gap"] > 0

    def test_balanced_gap_small(self):
        balanced = dict(IMBALANCED, n_majority=300, n_minority=300)
        rec = T.train(cfg(dataset=balanced, steps=2000, eval_every=1000))
        assert abs(T.imbalance_report(rec)[-1]["gap"]) < 0.05

    def test_rejects_multiclass(self):
        rec = T.train(cfg(dataset=dict(BLOBS, k=3), steps=10, eval_every=10))
        with pytest.raises(ValueError):
            T.imbalance_report(rec)
