"""Optimizers, losses, the training loop, grid search and analysis reports."""
from .losses import accuracy, loss_ce, loss_kl, pearson
from .loop import (
    DATASETS,
    ConfigError,
    Dataset,
    DivergenceError,
    RunConfig,
    RunResult,
    build_model,
    evaluate,
    load_dataset,
    main_metric,
    metrics_csv,
    train_run,
)
from .model import TreeModel, load_model, prepare_examples
from .optim import OptimState, adadelta_step, adam_step, clip_global_norm, make_state
