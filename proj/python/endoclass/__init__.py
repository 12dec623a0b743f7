"""Capsule-endoscopy abnormality classifier core.

Thin convenience layer over the compiled ``endoclass._core`` module: focal
loss and its gradient, the AdamW optimizer, rank-based AUC and the full
metrics report, weighted sampling, the deterministic augmentation pipeline,
and the training loop itself.
"""

import json as _json

from ._core import (
    AdamW,
    apply_pipeline,
    auc_ovr,
    backward,
    chi_square_pvalue,
    decode_image,
    draw_weighted_indices,
    ensemble_average,
    eval_transform,
    evaluate_json,
    featurize,
    focal_loss,
    focal_loss_grad,
    forward,
    init_params,
    softmax,
    train_files,
)

__all__ = [
    "AdamW",
    "apply_pipeline",
    "auc_ovr",
    "backward",
    "chi_square_pvalue",
    "decode_image",
    "draw_weighted_indices",
    "ensemble_average",
    "eval_transform",
    "evaluate",
    "evaluate_json",
    "featurize",
    "focal_loss",
    "focal_loss_grad",
    "forward",
    "init_params",
    "softmax",
    "train_files",
]


def evaluate(probs, truth, class_names):
    """Full metrics report as a nested dict (per_class + aggregate)."""
    return _json.loads(evaluate_json(probs, truth, class_names))
