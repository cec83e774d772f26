import numpy as np
import pytest

from diam.graph import LabelSet
from diam.ingest import split
from diam.model import CheckpointError, bce_loss, forward
from diam.sampler import full_block
from diam.tensor import NumericalFault, Tape
from diam.train import (AdamState, TrainConfig, adam_step, make_bank, predict, train,
                        xavier_init)


def test_xavier_reproducible_and_bounded():
    a, b = xavier_init(8, 3, 2, seed=4), xavier_init(8, 3, 2, seed=4)
    for name, t in a.items():
        assert np.array_equal(t.data, b[name].data)
    assert not a["mgd1.b2"].data.any()
    bound = np.sqrt(6.0 / (8 + 16))
    assert np.abs(a["mgd1.W3"].data).max() <= bound


def test_adam_zero_gradient_and_first_step():
    params = xavier_init(4, 2, 1, seed=0)
    before = params.arrays()
    state = AdamState()
    adam_step(params, {}, state, 0.01)
    assert state.step == 1
    for name, t in params.items():
        assert np.array_equal(t.data, before[name])
    params = xavier_init(4, 2, 1, seed=0)
    grads = {name: np.full(t.shape, 0.3) for name, t in params.items()}
    adam_step(params, grads, AdamState(), 0.01)
    for name, t in params.items():
        assert np.allclose(before[name] - t.data, 0.01 * 0.3 / (0.3 + 1e-8))


def test_adam_deterministic_and_rejects_non_finite():
    grads = {"cls.b2": np.array([0.7])}
    runs = []
    for _ in range(2):
        params, state = xavier_init(4, 2, 1, seed=1), AdamState()
        adam_step(params, grads, state, 0.1)
        adam_step(params, grads, state, 0.1)
        runs.append(params.arrays())
    assert all(np.array_equal(runs[0][k], runs[1][k]) for k in runs[0])
    with pytest.raises(NumericalFault):
        adam_step(xavier_init(4, 2, 1), {"cls.b2": np.array([np.nan])}, AdamState(), 0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(c=7)
    assert TrainConfig(ablation="no_mgd").effective_layers == 0
    cfg = TrainConfig(c=16, fanouts=(3, 2))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def small_config(**kw):
    base = dict(c=8, layers=2, t_max=4, batch_size=16, epochs=1, fanouts=(5, 5), seed=3)
    base.update(kw)
    return TrainConfig(**base)


def test_single_epoch_history(small_synth):
    g, labels = small_synth
    result = train(small_config(), g, labels, split(labels, 0))
    assert len(result.history) == 1 and result.best_epoch == 1
    assert np.isfinite(result.history[0].loss)


def test_bitwise_reproducible(small_synth):
    g, labels = small_synth
    s = split(labels, 0)
    a = train(small_config(epochs=2), g, labels, s)
    b = train(small_config(epochs=2), g, labels, s)
    assert [r.loss for r in a.history] == [r.loss for r in b.history]
    for name, t in a.params.items():
        assert np.array_equal(t.data, b.params[name].data)


def test_overfits_a_tiny_graph(small_synth):
    g, labels = small_synth
    nodes = labels.nodes[:20]
    y = labels.label_of(nodes).astype(float)
    config = small_config(dropout=0.0, lr=0.01)
    bank, _ = make_bank(g, config)
    params = xavier_init(8, g.attr_dim, 2, seed=0)
    block = full_block(g, nodes, 2)
    state = AdamState()
    losses = []
    for _ in range(200):
        params.zero_grad()
        with Tape() as tape:
            loss = bce_loss(forward(block, bank, params).probs, y)
        tape.backward(loss)
        losses.append(float(loss.data))
        adam_step(params, {k: t.grad for k, t in params.items()}, state, 0.01)
        if losses[-1] < 0.05 * losses[0]:
            break
    assert losses[-1] < 0.05 * losses[0]


def test_predict_contracts(small_synth):
    g, labels = small_synth
    config = small_config()
    params = xavier_init(8, g.attr_dim, 2, seed=0)
    p = predict(params, g, [3, 3, 7], config)
    assert p[0] == p[1]
    threaded = predict(params, g, [3, 3, 7], config, workers=2)
    assert np.array_equal(p, threaded)
    with pytest.raises(CheckpointError):
        predict(xavier_init(8, g.attr_dim, 1), g, [3], config)
    with pytest.raises(CheckpointError):
        predict(xavier_init(16, g.attr_dim, 2), g, [3], config)


def test_no_mgd_prediction_ignores_distant_edges(small_synth):
    from diam.graph import Multigraph
    g, labels = small_synth
    config = small_config(ablation="no_mgd", standardize=False)
    params = xavier_init(8, g.attr_dim, 0, seed=2)
    v = 5
    keep = (g.src == v) | (g.dst == v)
    local = Multigraph.from_arrays(g.node_count, g.src[keep], g.dst[keep], g.timestamp[keep],
                                   g.attrs[keep])
    assert np.array_equal(predict(params, g, [v], config), predict(params, local, [v], config))


def test_training_reaches_good_validation_f1():
    from diam.synth import SynthConfig, generate
    g, labels = generate(SynthConfig(n_normal=400, n_illicit=100, seed=1))
    result = train(TrainConfig(c=16, lr=0.01, epochs=12, batch_size=32, seed=0), g, labels,
                   split(labels, 0))
    assert max(r.val_f1 for r in result.history) >= 0.85
    assert result.history[-1].loss < result.history[0].loss
