"""Iterative residual tuning of simulator parameters."""

from ._core import (
    BallParams,
    Dataset,
    DatasetSpec,
    TrajectoryError,
    TuneNetModel,
    TuneResult,
    cmaes_minimize,
    generate_pairs,
    load_dataset,
    load_tunenet,
    perfect_shot_height,
    plan_bounce_shot,
    run_command,
    save_dataset,
    simulate_arm,
    simulate_ball,
    train_tunenet,
    trajectory_error,
    tune_episode,
)

__all__ = [
    "BallParams",
    "Dataset",
    "DatasetSpec",
    "TrajectoryError",
    "TuneNetModel",
    "TuneResult",
    "cmaes_minimize",
    "generate_pairs",
    "load_dataset",
    "load_tunenet",
    "perfect_shot_height",
    "plan_bounce_shot",
    "run_command",
    "save_dataset",
    "simulate_arm",
    "simulate_ball",
    "train_tunenet",
    "trajectory_error",
    "tune_episode",
]
