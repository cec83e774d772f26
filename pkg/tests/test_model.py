import numpy as np
import pytest

from diam.graph import EdgeRecord, Multigraph, build
from diam.model import (CheckpointError, ModelParams, attention_weights, classify, edge2seq,
                        forward, gru_cell, load_checkpoint, mgd_layer, save_checkpoint)
from diam.sampler import IN, OUT, Hop, full_block, sample_block
from diam.seqgen import SequenceBank, build_sequences
from diam.tensor import Tensor

from conftest import random_graph, random_params
from oracle import reference_probs


def zero_gru(half):
    return {k: Tensor(np.zeros((half,) if k.startswith("b") else (half, half)))
            for k in ("W_r", "W_u", "W_n", "U_r", "U_u", "U_n", "b_r", "b_u", "b_n")}


def test_gru_zero_parameters():
    p = zero_gru(3)
    assert not gru_cell(Tensor(np.ones(3)), Tensor(np.zeros(3)), p).data.any()
    v = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(gru_cell(Tensor(np.ones(3)), Tensor(v), p).data, 0.5 * v)


def test_length_one_sequence_pools_to_single_state():
    g = build(2, [EdgeRecord(0, 1, 0.0, (0.3, -1.0))])
    params = random_params(4, 2, 0, seed=2)
    h = edge2seq(SequenceBank(g, 3), [0], params).data[0]
    P = params.gru("out")
    z = params["W_out"].data @ np.array([0.3, -1.0]) + params["b_out"].data
    expected = gru_cell(Tensor(z), Tensor(np.zeros(2)), P).data
    assert np.allclose(h[:2], expected, atol=1e-15)


def test_identical_sequences_give_identical_representations():
    recs = [EdgeRecord(0, 2, 1.0, (1.0, 2.0)), EdgeRecord(1, 3, 1.0, (1.0, 2.0))]
    h = edge2seq(SequenceBank(build(4, recs), 4), [0, 1], random_params(6, 2, 0)).data
    assert np.array_equal(h[0], h[1])


def hop_of(center, neighbor, direction):
    n = len(center)
    return Hop(np.array(center), np.array(neighbor), np.arange(n), np.array(direction, dtype=np.int8))


def test_empty_in_neighbourhood_gives_zero_r_in():
    rng = np.random.default_rng(0)
    params = random_params(4, 2, 1)
    p = params.layer(1)
    h_prev = Tensor(rng.normal(size=(2, 4)))
    h, alpha = mgd_layer(h_prev, hop_of([0], [1], [OUT]), 1, p)
    z = p["W2"].data @ h_prev.data[0] + p["b2"].data
    z1 = p["W2"].data @ h_prev.data[1] + p["b2"].data
    r_out = p["W3"].data @ np.concatenate([z1, z - z1])
    a = alpha.data[0]
    assert np.allclose(h.data[0], a[0] * z + a[2] * r_out, atol=1e-14)


def test_equal_neighbours_have_zero_discrepancy_half():
    params = random_params(4, 2, 1)
    p = params.layer(1)
    row = np.random.default_rng(1).normal(size=4)
    h_prev = Tensor(np.stack([row, row, row]))
    h, alpha = mgd_layer(h_prev, hop_of([0, 0], [1, 2], [IN, IN]), 1, p, no_attention=True)
    z = p["W2"].data @ row + p["b2"].data
    half = p["W3"].data[:, :4] @ z
    assert np.allclose(h.data[0], z + 2 * half, atol=1e-13)
    assert alpha.data.tolist() == [[1.0, 1.0, 1.0]]


def test_attention_special_cases():
    rng = np.random.default_rng(2)
    x = Tensor(rng.normal(size=5))
    a = attention_weights(x, x, x, Tensor(rng.normal(size=5))).data
    assert np.allclose(a, 1 / 3, atol=1e-15)
    q0 = Tensor(np.zeros(5))
    a = attention_weights(x, Tensor(rng.normal(size=5)), Tensor(rng.normal(size=5)), q0).data
    assert np.allclose(a, 1 / 3, atol=1e-15)


def test_classifier_with_zero_parameters():
    params = ModelParams(4, 2, 0)
    assert classify(Tensor(np.ones((3, 4))), params).data.tolist() == [0.5, 0.5, 0.5]


def test_no_mgd_depends_only_on_own_sequences():
    rng = np.random.default_rng(3)
    g = random_graph(rng, 12, 80, d=2)
    params = random_params(6, 2, 0)
    v = 4
    keep = (g.src == v) | (g.dst == v)
    local = Multigraph.from_arrays(g.node_count, g.src[keep], g.dst[keep], g.timestamp[keep],
                                   g.attrs[keep])
    a = forward(sample_block(g, [v], []), SequenceBank(g, 5), params).probs.data
    b = forward(sample_block(local, [v], []), SequenceBank(local, 5), params).probs.data
    assert np.array_equal(a, b)


def test_permutation_equivariance():
    rng = np.random.default_rng(4)
    n = 25
    g = random_graph(rng, n, 150, d=3, parallel=4)
    perm = rng.permutation(n)
    h = Multigraph.from_arrays(n, perm[g.src], perm[g.dst], g.timestamp, g.attrs)
    params = random_params(8, 3, 2, seed=5)
    p1 = forward(full_block(g, np.arange(n), 2), SequenceBank(g, 4), params).probs.data
    p2 = forward(full_block(h, perm, 2), SequenceBank(h, 4), params).probs.data
    assert np.allclose(p1, p2, atol=1e-12)


@pytest.mark.parametrize("no_attention", [False, True])
def test_forward_matches_oracle_small(no_attention):
    rng = np.random.default_rng(6)
    g = random_graph(rng, 15, 60, d=2, parallel=5)
    params = random_params(6, 2, 2, seed=6)
    out = forward(full_block(g, np.arange(15), 2), SequenceBank(g, 3), params,
                  no_attention=no_attention)
    ref, _ = reference_probs(15, g.src, g.dst, g.timestamp, g.attrs, params.arrays(), 2, 3,
                             no_attention=no_attention)
    assert np.max(np.abs(out.probs.data - ref[out.nodes])) < 1e-10


def test_block_depth_must_match_layers():
    g = random_graph(np.random.default_rng(7), 5, 10)
    with pytest.raises(ValueError):
        forward(full_block(g, [0], 1), SequenceBank(g, 2), random_params(4, 2, 2))


def test_edge2seq_encode_checks_dimension():
    from diam.model import edge2seq_encode
    g = random_graph(np.random.default_rng(8), 5, 10, d=2)
    with pytest.raises(ValueError):
        edge2seq_encode(build_sequences(g, 0, 3), random_params(4, 3, 0))


def test_checkpoint_round_trip_and_corruption(tmp_path):
    params = random_params(4, 2, 1, seed=9)
    path = str(tmp_path / "ck.npz")
    save_checkpoint(path, params, {"c": 4}, {"mean": np.zeros(2)})
    back, config, extras = load_checkpoint(path)
    assert config == {"c": 4} and extras["mean"].tolist() == [0.0, 0.0]
    for name, t in params.items():
        assert np.array_equal(back[name].data, t.data)
    bad = params.arrays()
    bad["cls.W1"] = np.zeros((3, 3))
    with pytest.raises(CheckpointError):
        ModelParams(4, 2, 1, bad)
    corrupt = tmp_path / "bad.npz"
    corrupt.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(str(corrupt))
