import os
from pathlib import Path

import numpy as np
import pytest

import tunenet

SOURCE = Path(os.environ.get("TUNENET_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def test_ball_rebound_law():
    frames = tunenet.simulate_ball(0.6, drop_height=4.5)
    assert frames.shape == (400, 3)
    z = frames[:, 2]
    first_bounce = np.argmin(z[:80])
    apex = z[first_bounce:].max()
    assert apex - 0.5 == pytest.approx(0.36 * 4.0, rel=0.02)


def test_arm_torques_affine_in_mass():
    t0, t1, t2 = (tunenet.simulate_arm(m) for m in (0.0, 1.0, 2.0))
    assert t0.shape == (150, 2)
    np.testing.assert_allclose(t2 - t0, 2 * (t1 - t0), atol=1e-10)


def test_trajectory_error_units():
    target = tunenet.simulate_ball(0.5)
    err = tunenet.trajectory_error(target + [0.01, 0.0, 0.0], target)
    assert err.mae_cm == pytest.approx(1.0)


def test_dataset_train_tune(tmp_path):
    spec = tunenet.DatasetSpec()
    spec.n_train, spec.n_val, spec.n_test = 120, 10, 5
    spec.frames = 120
    spec.seed = 4
    ds = tunenet.generate_pairs(spec)
    path = str(tmp_path / "d.tnds")
    tunenet.save_dataset(ds, path)
    back = tunenet.load_dataset(path)
    np.testing.assert_array_equal(back.residuals("train"), ds.residuals("train"))
    o_p, o_t = ds.observations("test", 0)
    assert o_p.shape == (3, 120)

    model, losses = tunenet.train_tunenet(ds, epochs=20, seed=1)
    assert losses[-1] < losses[0]
    res = tunenet.tune_episode(model, ds, "test", 0, K=3, bounds=(0.0, 1.0))
    assert res.rollouts_used == 3
    assert len(res.estimates) == 4


def test_cmaes_and_shot():
    best, value, rollouts = tunenet.cmaes_minimize(lambda x: (x[0] - 0.3) ** 2, [0.8], 200, seed=2)
    assert abs(best[0] - 0.3) < 0.02
    assert rollouts % 10 == 0
    h = tunenet.perfect_shot_height(0.5)
    height, miss, reached = tunenet.plan_bounce_shot(0.5)
    assert reached and abs(height - h) < 0.03


def test_run_command_and_missing_artifacts(tmp_path):
    cfg = str(SOURCE / "tests" / "data" / "tiny.json")
    run = str(tmp_path / "run")
    with pytest.raises(FileNotFoundError):
        tunenet.run_command("train", cfg, seed=1, run_dir=run)
    outputs = tunenet.run_command("gen-data", cfg, seed=1, run_dir=run)
    assert "datasets.csv" in outputs
    with pytest.raises(ValueError):
        tunenet.run_command("frobnicate", cfg)
