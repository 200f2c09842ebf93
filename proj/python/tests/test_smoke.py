import math

import numpy as np
import pytest

import cleanup


def test_production_functions():
    assert cleanup.apple_regrowth_probability(0.45, "human") == pytest.approx(0.0335)
    assert cleanup.apple_regrowth_probability(0.9, "human") == 0.0
    assert cleanup.pollution_accrual_probability(0.1) == 0.5
    assert cleanup.default_params("human")["episode_length"] == 2000


def test_env_steps_renders_and_replays(tmp_path):
    env = cleanup.Env(params={"episode_length": 50}, seed=3, condition="anonymous")
    assert env.num_players == 5
    names = cleanup.action_names()
    assert names[0] == "noop" and "fire_clean" in names
    rng = np.random.default_rng(0)
    while not env.done:
        events = env.step(rng.integers(0, len(names), size=5).tolist())
        assert len(events["reward"]) == 5
    view = env.observation(0, window=9)
    assert view.shape == (9, 9) and view.dtype == np.uint8
    assert view[4, 4] == 6  # self sprite at the centre

    path = tmp_path / "episode.jsonl"
    env.log.save(str(path))
    log = cleanup.EpisodeLog.load(str(path))
    assert len(log) == 50 and log.complete
    assert log.condition == "anonymous"
    assert log.replay()["identical"]
    assert log.replay()["final_scores"] == env.scores


def test_bad_params_raise():
    with pytest.raises(ValueError):
        cleanup.Env(params={"episode_length": 0})
    with pytest.raises(ValueError):
        cleanup.Env(profile="other")


def test_metrics_and_statistics():
    assert cleanup.turn_taking_score([0, 1, 2, 3, 4]) == 1.0
    assert cleanup.turn_taking_score([0, 1, 0, 1, 0, 1, 0, 1, 0, 1]) == pytest.approx(0.4)
    assert cleanup.turn_taking_score([]) is None
    assert cleanup.gini([1.0, 1.0, 1.0]) == 0.0
    assert cleanup.fisher_combine([0.05, 0.05])["statistic"] == pytest.approx(11.98, abs=1e-2)
    r = cleanup.welch_t_test([3.0, 4.0, 5.0, 4.5], [1.0, 2.0, 1.5, 2.5], sided="greater")
    assert 0.0 < r["p"] < 0.05
    b = cleanup.jenks_breaks([0, 1, 2, 50, 51, 55])
    assert b["upper_min"] == 50


def test_scripted_mixtures_and_pipeline(tmp_path):
    logs = cleanup.scripted_mixtures(6, seed=1, params={"episode_length": 100})
    assert len(logs) == 6
    for k, log in enumerate(logs):
        m = cleanup.summarize(log)
        assert m["contribution_level"] >= 0
        assert len(m["contributions"]) == 5
        log.save(str(tmp_path / f"episode_{k}.jsonl"))
    rows = cleanup.collect(str(tmp_path))
    assert len(rows) == 6
    assert all(math.isfinite(r["collective_return"]) for r in rows)
    cleanup.analyze(str(tmp_path), str(tmp_path / "report"), bootstrap_n=50)
    assert (tmp_path / "report" / "summary.csv").exists()


def test_train_and_evaluate(tmp_path):
    config = {
        "profile": "toy",
        "seed": 2,
        "population_size": 10,
        "arena_count": 2,
        "batch_size": 2,
        "env": {"episode_length": 100},
        "eval": {"groups": 1, "episodes_per_group": 1},
    }
    out = tmp_path / "ckpt"
    a = cleanup.train(config, str(out), max_episodes=2)
    b = cleanup.train(config, max_episodes=2)
    assert a["episodes"] == 2 and a["params_hash"] == b["params_hash"]
    assert cleanup.config_hash(config) == cleanup.config_hash(dict(config))
    logs = cleanup.evaluate(str(out))
    assert len(logs) == 1 and logs[0].replay()["identical"]
