"""Glue between a TrainingSet and the built-in trainer: formats inputs,
picks the validation split, and trains."""

from __future__ import annotations

from explpipe.filtering.hashed_linear import (
    HashedLinearModel,
    TrainerConfig,
    TrainHistory,
    split_for_validation,
    train_model,
)
from explpipe.filtering.inputs import TrainingSet, format_filter_input


def train_builtin(
    training_set: TrainingSet,
    cfg: TrainerConfig = TrainerConfig(),
) -> tuple[HashedLinearModel, TrainHistory]:
    """Train on the train split, early-stopping on the dev split.

    Without dev examples, a seeded instance-level fraction of the train split
    is carved out (whole instances move together, preserving split
    integrity).
    """
    training_set.verify_split_integrity()
    train_examples = training_set.split_examples("train")
    val_examples = training_set.split_examples("dev")
    if not val_examples:
        val_instances = split_for_validation(
            [ex.instance_id for ex in train_examples], cfg.val_fraction, cfg.seed
        )
        val_examples = [ex for ex in train_examples if ex.instance_id in val_instances]
        train_examples = [ex for ex in train_examples if ex.instance_id not in val_instances]
    return train_model(
        train_texts=[format_filter_input(ex.filter_input) for ex in train_examples],
        train_labels=[ex.label for ex in train_examples],
        val_texts=[format_filter_input(ex.filter_input) for ex in val_examples],
        val_labels=[ex.label for ex in val_examples],
        cfg=cfg,
        mode=training_set.mode,
    )
