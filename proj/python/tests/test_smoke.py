import math

import numpy as np
import pytest

import gsvin


def small_manifest(maps=10, seed=1):
    return {"height": 8, "width": 8, "maps": maps, "seed": seed}


def test_heuristic_values():
    assert gsvin.heuristic_k(32, 32, 3) == 46
    assert gsvin.heuristic_k(16, 16, 11) == 5
    assert gsvin.scaled_k(32, 32, 7, 2.0) == 31
    with pytest.raises(gsvin.ValidationError):
        gsvin.heuristic_k(32, 32, 1)


def test_dataset_counts_and_determinism():
    a = gsvin.generate_dataset(small_manifest())
    b = gsvin.generate_dataset(small_manifest(), workers=2)
    assert len(a.train) + len(a.test) == 60
    assert len(a.train) == 48
    assert a.manifest["maps"] == 10
    for x, y in zip(a.train, b.train):
        assert np.array_equal(x.obstacles, y.obstacles)
        assert (x.agent, x.goal, x.expert_action) == (y.agent, y.goal, y.expert_action)


def test_impossible_density_raises():
    with pytest.raises(gsvin.GenerationError):
        gsvin.generate_dataset({"height": 4, "width": 4, "maps": 2, "density": [0.9, 0.9]})


def test_astar_matches_chebyshev_on_empty_map():
    length, path = gsvin.astar_shortest(np.zeros((8, 8), np.uint8), (7, 7), (0, 0))
    assert length == 7
    assert path[0] == (0, 0) and path[-1] == (7, 7)


def test_tabular_vi_closed_form():
    reward = np.zeros((4, 4))
    reward[0, 0] = 10.0
    v = gsvin.tabular_vi(np.zeros((4, 4), np.uint8), (0, 0), reward, gamma=0.9)
    for r in range(4):
        for c in range(4):
            if (r, c) != (0, 0):
                assert v[r, c] == pytest.approx(10 * 0.9 ** (max(r, c) - 1), abs=1e-12)


def test_oracle_replay_is_perfect():
    report = gsvin.oracle_report(gsvin.generate_dataset(small_manifest(20)))
    assert report["success_rate"] == 1.0
    assert report["traj_diff"] == 0.0


def test_model_logits_and_softmax():
    data = gsvin.generate_dataset(small_manifest())
    model = gsvin.Model(gsvin.model_config("GSVIN", 8, 8, 5), seed=3)
    logits = model.logits(data, "test")
    assert logits.shape == (len(data.test), 8)
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert model.params["vi.kernel"].shape == (8, 2, 5, 5)


def test_train_evaluate_checkpoint(tmp_path):
    data = gsvin.generate_dataset(small_manifest(12))
    cfg = gsvin.model_config("VIN", 8, 8, 3)
    model = gsvin.train(cfg, data, {"epochs": 2, "batch_size": 32, "seed": 1})
    record = model.record
    assert record["status"] == "completed"
    assert len(record["epochs"]) == 2
    report = model.evaluate(data)
    assert 0.0 <= report["accuracy"] <= 1.0
    path = tmp_path / "model.gsck"
    model.save(path)
    again = gsvin.load_checkpoint(path)
    assert again.epochs_done == 2
    for name, value in model.params.items():
        assert np.array_equal(value, again.params[name])
    assert again.evaluate(data) == report


def test_huge_learning_rate_diverges():
    data = gsvin.generate_dataset(small_manifest(10))
    model = gsvin.train(gsvin.model_config("GSVIN", 8, 8, 3), data, {"epochs": 3, "batch_size": 32, "learning_rate": 1e3})
    assert model.record["status"] == "diverged"


def test_corrupt_checkpoint_rejected(tmp_path):
    path = tmp_path / "bad.gsck"
    path.write_bytes(b"GSVINCK" + bytes(20))
    with pytest.raises(gsvin.FormatError):
        gsvin.load_checkpoint(path)
