import json

import numpy as np
import pytest

from conftest import random_batch, tiny_params
from fgsm_unlearn import ops
from fgsm_unlearn.data import LabeledDataset
from fgsm_unlearn.errors import DatasetFloorError, ValidationError
from fgsm_unlearn.lenet import forward_logits, init_params
from fgsm_unlearn.ops import AdamState
from fgsm_unlearn.unlearn import (
    BUDGET_EXHAUSTED,
    DATASET_FLOOR,
    REACHED_TAU,
    HyperConfig,
    score_adversarial_loss,
    select_top_k,
    unlearn_round,
    unlearn_until_robust,
)


def make_ds(n, seed=0):
    x, y = random_batch(n, seed)
    return LabeledDataset(images=x, labels=y, ids=np.arange(n, dtype=np.uint64))


def quick_cfg(**kw):
    defaults = dict(
        epsilon=0.1, k=10, tau=0.9, epochs_per_round=1, batch_size=32,
        lr=1e-3, seed=0, max_rounds=3, min_train_size=20,
    )
    defaults.update(kw)
    return HyperConfig(**defaults)


class TestHyperConfig:
    def test_defaults_mirror_protocol(self):
        cfg = HyperConfig()
        assert cfg.epsilon == 0.1
        assert cfg.k == 100
        assert cfg.tau == 0.9
        assert cfg.epochs_per_round == 15
        assert cfg.batch_size == 128

    def test_validation(self):
        with pytest.raises(ValidationError):
            HyperConfig(tau=1.5)
        with pytest.raises(ValidationError):
            HyperConfig(k=0)
        with pytest.raises(ValidationError):
            HyperConfig(k=200, min_train_size=100)
        with pytest.raises(ValidationError):
            HyperConfig(epsilon=2.0)


class TestScoring:
    def test_matches_batch_of_one_oracle(self):
        p = tiny_params()
        ds = make_ds(6, seed=1)
        scores = score_adversarial_loss(p, ds, batch_size=4)
        assert [sid for sid, _ in scores] == list(range(6))
        for i, (sid, loss) in enumerate(scores):
            logits = forward_logits(p, ds.images[i : i + 1])
            single = ops.per_example_cross_entropy(logits, ds.labels[i : i + 1])[0]
            assert abs(loss - float(single)) < 1e-5

    def test_scores_nonnegative(self):
        scores = score_adversarial_loss(tiny_params(), make_ds(8, seed=2))
        assert all(loss >= 0.0 for _, loss in scores)

    def test_confident_correct_scores_near_zero(self):
        p = tiny_params()
        ds = make_ds(1, seed=3)
        logits = forward_logits(p, ds.images)
        cls = int(logits[0].argmax())
        ds.labels[:] = 0.0
        ds.labels[0, cls] = 1.0
        p.out_b = p.out_b.copy()
        p.out_b[cls] += 50.0
        (_, loss), = score_adversarial_loss(p, ds)
        assert loss < 1e-4


class TestSelectTopK:
    def test_k_zero(self):
        assert select_top_k([(1, 0.5)], 0) == set()

    def test_spec_example(self):
        assert select_top_k([(7, 0.5), (3, 2.0), (9, 1.0)], 2) == {3, 9}

    def test_saturation(self):
        assert select_top_k([(1, 0.1), (2, 0.2)], 5) == {1, 2}

    def test_tie_breaks_to_smaller_id(self):
        assert select_top_k([(9, 1.0), (2, 1.0), (5, 1.0)], 2) == {2, 5}


class TestUnlearnRound:
    def test_size_arithmetic(self, dataset):
        from fgsm_unlearn.data import subset

        train, test = dataset
        tr = subset(train, 60, seed=4)
        te = subset(test, 40, seed=4)
        p = init_params(0)
        adam = AdamState.zeros_like(p.as_dict())
        cfg = quick_cfg(k=10, min_train_size=20)
        p, adam, tr2, metrics = unlearn_round(p, adam, tr, te, cfg, round_idx=0)
        assert metrics.train_size_before == 60
        assert len(tr2) == 50
        assert len(metrics.removed_ids) == 10
        assert set(metrics.removed_ids).isdisjoint(set(int(i) for i in tr2.ids))
        assert 0.0 <= metrics.clean_acc <= 1.0 and 0.0 <= metrics.adv_acc <= 1.0
        assert metrics.clean_loss >= 0.0 and metrics.adv_loss >= 0.0

    def test_floor_violation(self, dataset):
        from fgsm_unlearn.data import subset

        train, test = dataset
        tr = subset(train, 25, seed=5)
        p = init_params(0)
        cfg = quick_cfg(k=10, min_train_size=20)
        with pytest.raises(DatasetFloorError):
            unlearn_round(p, AdamState.zeros_like(p.as_dict()), tr, tr, cfg, 0)


class TestUnlearnLoop:
    def test_already_robust_zero_rounds(self, dataset):
        from fgsm_unlearn.data import subset

        train, test = dataset
        tr = subset(train, 40, seed=6)
        te = subset(test, 30, seed=6)
        p = init_params(0)
        cfg = quick_cfg(tau=0.0)
        _, log = unlearn_until_robust(p, AdamState.zeros_like(p.as_dict()), tr, te, cfg)
        assert log.terminal_status == REACHED_TAU
        assert log.rounds == []

    def test_budget_exhausted(self, dataset, tmp_path):
        from fgsm_unlearn.data import subset

        train, test = dataset
        tr = subset(train, 80, seed=7)
        te = subset(test, 30, seed=7)
        p = init_params(0)
        cfg = quick_cfg(tau=1.0, max_rounds=2, k=10, min_train_size=20)
        log_path = str(tmp_path / "run.jsonl")
        _, log = unlearn_until_robust(
            p, AdamState.zeros_like(p.as_dict()), tr, te, cfg, log_path=log_path
        )
        assert log.terminal_status == BUDGET_EXHAUSTED
        assert len(log.rounds) == 2
        lines = [json.loads(l) for l in open(log_path) if l.strip()]
        assert lines[0].get("initial") is True
        round_lines = [l for l in lines if "round" in l]
        assert len(round_lines) == 2
        assert lines[-1]["terminal_status"] == BUDGET_EXHAUSTED
        assert lines[-1]["total_rounds"] == 2
        for l in round_lines:
            assert set(l) >= {
                "round", "train_size_before", "removed_ids", "clean_acc",
                "clean_loss", "adv_acc", "adv_loss", "epsilon", "k", "wall_time_s",
            }

    def test_dataset_floor_status(self, dataset):
        from fgsm_unlearn.data import subset

        train, test = dataset
        tr = subset(train, 45, seed=8)
        te = subset(test, 30, seed=8)
        p = init_params(0)
        # one round possible (45 -> 35), then 35 - 10 < 30
        cfg = quick_cfg(tau=1.0, max_rounds=10, k=10, min_train_size=30)
        _, log = unlearn_until_robust(p, AdamState.zeros_like(p.as_dict()), tr, te, cfg)
        assert log.terminal_status == DATASET_FLOOR
        assert len(log.rounds) == 1

    def test_sizes_strictly_decrease_and_ids_never_return(self, dataset):
        from fgsm_unlearn.data import subset

        train, test = dataset
        tr = subset(train, 70, seed=9)
        te = subset(test, 30, seed=9)
        p = init_params(0)
        cfg = quick_cfg(tau=1.0, max_rounds=3, k=10, min_train_size=20)
        _, log = unlearn_until_robust(p, AdamState.zeros_like(p.as_dict()), tr, te, cfg)
        sizes = [r.train_size_before for r in log.rounds]
        assert sizes == sorted(sizes, reverse=True)
        removed: set[int] = set()
        for r in log.rounds:
            assert removed.isdisjoint(r.removed_ids)
            removed.update(r.removed_ids)
        for a, b in zip(log.rounds, log.rounds[1:]):
            assert b.train_size_before == a.train_size_before - len(a.removed_ids)

    def test_deterministic_runlog(self, dataset):
        from fgsm_unlearn.data import subset

        train, test = dataset
        tr = subset(train, 60, seed=10)
        te = subset(test, 30, seed=10)
        cfg = quick_cfg(tau=1.0, max_rounds=2, k=10, min_train_size=20)

        def run():
            p = init_params(3)
            return unlearn_until_robust(p, AdamState.zeros_like(p.as_dict()), tr, te, cfg)

        p1, log1 = run()
        p2, log2 = run()
        for name in p1.as_dict():
            np.testing.assert_array_equal(p1.as_dict()[name], p2.as_dict()[name])
        for a, b in zip(log1.rounds, log2.rounds):
            assert a.removed_ids == b.removed_ids
            assert a.clean_acc == b.clean_acc
            assert a.adv_acc == b.adv_acc
