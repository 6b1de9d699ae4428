import math

import numpy as np
import pytest

clfd = pytest.importorskip("clfd")


def test_haar_block_and_roundtrip():
    ll, lh, hl, hh = clfd.haar_forward(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert (ll[0, 0], lh[0, 0], hl[0, 0], hh[0, 0]) == (5.0, -1.0, -2.0, 0.0)

    rng = np.random.default_rng(0)
    plane = rng.random((8, 6)).astype(np.float32)
    back = clfd.haar_inverse(*clfd.haar_forward(plane))
    assert np.max(np.abs(back - plane)) <= 1e-6
    with pytest.raises(clfd.DimensionError):
        clfd.haar_forward(np.zeros((3, 4)))


def test_encoder_halves_resolution():
    w = clfd.EncoderWeights(seed=3)
    assert len(w.values) == 27
    out = clfd.encode(np.zeros((3, 8, 8), dtype=np.float32), w)
    assert out.shape == (3, 4, 4)


def test_keep_probabilities_match_closed_form():
    counter = np.array([[4, 0, 2], [1, 3, 0], [0, 0, 5]], dtype=np.uint64)
    ps = clfd.semantic_keep_probs(counter, 2, beta=2.0)
    assert ps == pytest.approx([0.0, 0.0, 1.0 - math.exp(-2.0)])
    pf = clfd.frequency_keep_probs(counter, 0, 1, 1.0, 1.0, lam=0.5)
    expected = [
        0.5 * math.exp(-1.0 / 3.0) + 0.5 * (1.0 - math.exp(-1.0)),
        0.5 * math.exp(-1.0) + 0.5 * 1.0 * (1.0 - math.exp(0.0)),
        0.5 * 1.0 + 0.5 * (1.0 - math.exp(-0.5)),
    ]
    assert pf == pytest.approx(expected, abs=1e-12)


def test_selection():
    assert clfd.selection_size(512) == 307
    mask = clfd.topk_select([float(i) for i in range(10)])
    assert mask == [0, 0, 0, 0, 1, 1, 1, 1, 1, 1]


def test_metrics():
    r = np.array([[1.0, 0.0], [0.5, 1.0]])
    assert clfd.average_accuracy(r) == pytest.approx(0.75)
    assert clfd.final_forgetting(r) == pytest.approx(0.5)
    s, p, tradeoff = clfd.stability_plasticity(r)
    assert (s, p) == (0.5, 1.0)
    assert tradeoff == pytest.approx(2.0 / 3.0)
    ratio = clfd.count_flops("resnet18", 32, 32) / clfd.count_flops("resnet18", 16, 16)
    assert abs(ratio - 3.96) <= 0.15


def test_config_errors_name_the_nearest_key():
    with pytest.raises(clfd.ConfigError, match="cffs.lambda"):
        clfd.config_dump("data.format = synthetic\ncffs.lamda = 0.5\n")


def test_short_run():
    text = "\n".join([
        "data.format = synthetic",
        "data.num_classes = 4",
        "data.train_per_class = 8",
        "data.test_per_class = 4",
        "optim.epochs = 2",
        "optim.batch = 8",
        "strategy.replay_batch = 8",
    ])
    out = clfd.run(text, seed=1)
    assert out["class_il"].shape == (2, 2)
    assert 0.0 <= out["class_il"][1, 0] <= 1.0
    assert math.isnan(out["class_il"][0, 1])
    digests = out["encoder_digests"]
    assert len(digests) == 2 and digests[0] == digests[1]
    again = clfd.run(text, seed=1)
    assert np.array_equal(again["class_il"], out["class_il"], equal_nan=True)
