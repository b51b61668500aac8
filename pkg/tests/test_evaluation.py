import math

import numpy as np
import pytest

from oboot import driver
from oboot.bootstrap import BootstrapConfig, EnsemblePrediction, predict_example
from oboot.evaluation import HoldoutTracker, end_of_pass, is_holdout, record, sign
from oboot.learner import LossKind, WeightTable
from oboot.parser import Example


def make(label, importance=1.0):
    return Example(label, importance, None, np.array([1], dtype=np.int64), np.array([1.0]))


def test_is_holdout_examples():
    assert [is_holdout(o, 10) for o in (9, 19, 29)] == [True] * 3
    assert [is_holdout(o, 10) for o in (0, 10)] == [False] * 2
    assert [is_holdout(o, 2) for o in range(6)] == [False, True] * 3


def test_is_holdout_errors():
    with pytest.raises(ValueError):
        is_holdout(3, 1)
    with pytest.raises(ValueError):
        is_holdout(-1, 10)


def test_single_holdout_example_mean():
    t = HoldoutTracker()
    record(t, make(2.0), 0.0, holdout=True)
    assert t.holdout_mean == 2.0
    assert t.train_mean is None


def test_importance_weights_the_mean():
    t = HoldoutTracker()
    record(t, make(2.0, importance=2.0), 0.0, holdout=True)  # loss 2
    record(t, make(1.0), 0.0, holdout=True)  # loss 0.5
    assert t.holdout_mean == pytest.approx((2 * 2.0 + 0.5) / 3)


def test_unit_importance_gives_plain_mean():
    t = HoldoutTracker()
    losses = []
    for y, p in [(1.0, 0.3), (-2.0, 0.5), (0.5, 0.5), (3.0, -1.0)]:
        record(t, make(y), p, holdout=False)
        losses.append(0.5 * (p - y) ** 2)
    assert t.train_mean == pytest.approx(sum(losses) / 4, rel=1e-15)


def test_record_accepts_ensemble_predictions_and_counts_errors():
    t = HoldoutTracker(kind=LossKind.LOGISTIC)
    pred = EnsemblePrediction(np.array([0.0]), 0.0, (0.0, 0.0))
    record(t, make(-1.0), pred, holdout=True)
    m = t.holdout.metrics()
    assert m.mean_loss == pytest.approx(math.log(2))
    assert m.error_rate == 1.0  # sign(0) is positive


def test_record_rejects_unlabeled():
    with pytest.raises(ValueError):
        record(HoldoutTracker(), make(None), 0.0, holdout=True)


def test_error_rate_zero_when_signs_always_match():
    t = HoldoutTracker()
    for y in (1.0, -1.0, 2.0, -0.5):
        record(t, make(y), 0.1 * y, holdout=True)
    assert t.holdout.metrics().error_rate == 0.0


def test_sign_of_zero_is_positive():
    assert sign(0.0) == 1.0 and sign(-0.0) == 1.0 and sign(-1e-300) == -1.0


def test_end_of_pass_strict_improvement():
    t = HoldoutTracker()
    flags = []
    for loss in (0.5, 0.4, 0.45, 0.4):
        record(t, make(math.sqrt(2 * loss)), 0.0, holdout=True)
        flags.append(end_of_pass(t)[1])
    assert flags == [True, True, False, False]
    assert t.per_pass_holdout == pytest.approx([0.5, 0.4, 0.45, 0.4])
    assert t.best_holdout_loss == pytest.approx(0.4)
    assert t.holdout.count == 0 and t.train.count == 0


def test_end_of_pass_without_holdout_examples():
    t = HoldoutTracker()
    mean, improved = end_of_pass(t)
    assert mean is None and not improved
    assert t.best_holdout_loss == math.inf


def test_tracker_period_validation():
    with pytest.raises(ValueError):
        HoldoutTracker(period=1)


def test_scoring_a_holdout_example_leaves_the_table_alone():
    t = WeightTable(6, 3)
    t.rows[:] = np.random.default_rng(0).normal(size=t.rows.shape)
    before = t.checksum()
    tracker = HoldoutTracker()
    record(tracker, make(1.0), predict_example(t, make(1.0), BootstrapConfig(3)), holdout=True)
    assert t.checksum() == before


def _lines(n, seed):
    rng = np.random.default_rng(seed)
    return [f"{rng.normal():.4f} | a{rng.integers(20)}:{rng.normal():.3f} b{rng.integers(20)}"
            for _ in range(n)]


def test_holdout_lines_never_reach_the_table(tmp_path):
    # swap every holdout line for unrelated content: the trained model is unchanged
    base = _lines(60, 0)
    other = _lines(60, 1)
    swapped = [other[i] if is_holdout(i, 5) else line for i, line in enumerate(base)]
    paths = []
    for name, lines in (("a", base), ("b", swapped)):
        p = tmp_path / f"{name}.txt"
        p.write_text("\n".join(lines) + "\n")
        paths.append(str(p))
    models = [
        driver.run_train(driver.RunConfig(input=p, passes=3, bits=8, n_models=4, holdout_period=5, seed=3))
        for p in paths
    ]
    assert models[0].last_table.checksum() == models[1].last_table.checksum()
    assert models[0].holdout_ordinals == models[1].holdout_ordinals
    assert models[0].holdout_ordinals[0] == list(range(4, 60, 5))
