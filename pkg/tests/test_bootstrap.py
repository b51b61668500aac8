import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oboot.bootstrap import (
    Aggregate,
    BootstrapConfig,
    aggregate,
    predict_example,
    quantile,
    train_example,
)
from oboot.distributions import RngState, WeightMode, draw_weights, sample_weight
from oboot.learner import DivergenceError, LearnerConfig, LossKind, WeightTable, predict, update
from oboot.parser import Example, Parser, ParserConfig

LCFG = LearnerConfig(LossKind.SQUARED, 0.5, 0.5)


def make(pairs, label=1.0, importance=1.0):
    idx = np.array([f for f, _ in pairs], dtype=np.int64)
    val = np.array([v for _, v in pairs], dtype=np.float64)
    return Example(label, importance, None, idx, val)


def stream(n, seed=0, bits=6):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = int(rng.integers(1, 6))
        pairs = list(zip(rng.integers(0, 2**bits, k).tolist(), rng.normal(size=k).tolist()))
        out.append(make(pairs, label=float(rng.normal()), importance=float(rng.uniform(0, 2))))
    return out


def ones(rng, w, n):
    return np.ones(n)


# -- training -------------------------------------------------------------------


def test_single_model_with_unit_draws_equals_bare_learner():
    a, b = WeightTable(6, 1), WeightTable(6, 1)
    cfg = BootstrapConfig(1)
    for ex in stream(200):
        train_example(a, ex, RngState(0), cfg, LCFG, sampler=ones)
        update(b, ex, 0, 1.0, LCFG)
    assert a.checksum() == b.checksum()
    assert a.counts.tolist() == b.counts.tolist()


def test_zero_importance_changes_no_submodel():
    t = WeightTable(6, 4)
    train_example(t, make([(1, 1.0), (2, -1.0)], importance=0.0), RngState(3), BootstrapConfig(4), LCFG)
    assert not t.weights.any()


def test_draws_follow_the_shared_stream_in_submodel_order():
    seen = []

    def spy(rng, w, n):
        z = draw_weights(rng, w, WeightMode.SCALED, n)
        seen.append(z.tolist())
        return z

    train_example(WeightTable(6, 3), make([(1, 1.0)], importance=1.5), RngState(42),
                  BootstrapConfig(3), LCFG, sampler=spy)
    replay = RngState(42)
    assert seen == [[sample_weight(replay, 1.5) for _ in range(3)]]


def test_default_sampler_matches_spy():
    a, b = WeightTable(6, 3), WeightTable(6, 3)
    ra, rb = RngState(8), RngState(8)
    cfg = BootstrapConfig(3)
    for ex in stream(50):
        train_example(a, ex, ra, cfg, LCFG)
        train_example(b, ex, rb, cfg, LCFG,
                      sampler=lambda r, w, n: [sample_weight(r, w) for _ in range(n)])
    assert a.checksum() == b.checksum()


def test_submodels_equal_independent_replays():
    n = 3
    data = stream(150, seed=5)
    table = WeightTable(6, n)
    rng = RngState(11)
    cfg = BootstrapConfig(n)
    for ex in data:
        train_example(table, ex, rng, cfg, LCFG)

    # replay the shared stream, giving submodel i every n-th draw
    replay = RngState(11)
    zs = [[sample_weight(replay, ex.importance) for _ in range(n)] for ex in data]
    probe = stream(20, seed=6)
    for i in range(n):
        solo = WeightTable(6, 1)
        for ex, z in zip(data, zs):
            update(solo, ex, 0, z[i], LCFG)
        assert np.array_equal(solo.rows[:, 0], table.rows[:, i])
        assert [predict(solo, ex, 0) for ex in probe] == [predict(table, ex, i) for ex in probe]


def test_config_mismatch_and_divergence_annotation():
    with pytest.raises(ValueError):
        train_example(WeightTable(4, 2), make([(1, 1.0)]), RngState(0), BootstrapConfig(3), LCFG)
    with pytest.raises(DivergenceError) as info:
        train_example(WeightTable(4, 2), make([(1, 1e20)], label=1e20), RngState(0),
                      BootstrapConfig(2), LCFG, sampler=lambda r, w, n: [0.0, 1.0])
    assert info.value.submodel == 1
    assert str(info.value).startswith("submodel 1")


def test_parse_once_per_line():
    lines = [f"{(-1) ** i} | a{i} b c:{i}".encode() for i in range(30)]
    parser = Parser(ParserConfig(8))
    table = WeightTable(8, 20)
    rng = RngState(0)
    cfg = BootstrapConfig(20)
    for ex in parser.iter_lines(lines):
        train_example(table, ex, rng, cfg, LCFG)
    assert parser.lines_parsed == 30
    assert table.counts.tolist() == [30] * 20


# -- aggregation ----------------------------------------------------------------


def agg(raw, how=Aggregate.MEAN, alpha=0.1):
    return aggregate(np.array(raw, dtype=float), BootstrapConfig(len(raw), aggregate=how, interval_level=alpha))


def test_mean_example():
    assert agg([0.2, 0.4, 0.6]).point == pytest.approx(0.4, abs=1e-16)


def test_majority_examples():
    p = agg([0.9, 0.1, -0.3], Aggregate.MAJORITY)
    assert p.point == 1.0
    assert p.vote_counts == (2, 1)
    assert agg([1.0, -1.0], Aggregate.MAJORITY).point == 1.0
    assert agg([0.0, -1.0], Aggregate.MAJORITY).point == 1.0
    assert agg([-0.5, -1.0, 2.0], Aggregate.MAJORITY).point == -1.0


def test_quantile_examples():
    assert quantile([3, 1, 2], 0.5) == 2
    assert quantile([1, 2, 3, 4], 0.5) == 2.5
    assert quantile([5.0], 0.3) == 5.0
    with pytest.raises(ValueError):
        quantile([1, 2], 1.5)
    with pytest.raises(ValueError):
        quantile([], 0.5)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
def test_quantile_endpoints_and_numpy(values):
    assert quantile(values, 0.0) == min(values)
    assert quantile(values, 1.0) == max(values)
    for q in (0.05, 0.25, 0.5, 0.95):
        assert quantile(values, q) == pytest.approx(np.quantile(values, q), rel=1e-12, abs=1e-9)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=25), st.randoms(),
       st.sampled_from(list(Aggregate)), st.floats(0.01, 0.99))
def test_aggregation_ignores_order(values, rnd, how, alpha):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = agg(values, how, alpha), agg(shuffled, how, alpha)
    assert a.point == b.point
    assert a.interval == b.interval
    assert a.lo <= quantile(values, 0.5) <= a.hi


def test_all_equal_submodels_collapse_the_interval():
    t = WeightTable(6, 5)
    cfg = BootstrapConfig(5, mode=WeightMode.UNIT)
    rng = RngState(0)
    for ex in stream(100):
        train_example(t, ex, rng, cfg, LCFG)
    for ex in stream(10, seed=9):
        p = predict_example(t, ex, cfg)
        assert p.lo == p.hi == p.point
        assert len(set(p.raw.tolist())) == 1


def test_predict_example_raw_scores():
    t = WeightTable(4, 3)
    t.rows[2, :3] = [0.5, -1.0, 2.0]
    p = predict_example(t, make([(2, 2.0)]), BootstrapConfig(3))
    assert p.raw.tolist() == [1.0, -2.0, 4.0]
    assert p.point == 1.0


@pytest.mark.parametrize("kw", [{"n_models": 0}, {"interval_level": 0.0}, {"interval_level": 1.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        BootstrapConfig(**kw)
