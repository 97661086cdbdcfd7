"""Depth-detachable MLPs: a base network whose leading layers can be dropped at inference."""

from nsn._nsn import (
    Error,
    Family,
    load_checkpoint,
    load_mnist,
    log_softmax,
    lr_at,
    matmul,
    nll_loss,
    parse_idx_images,
    parse_idx_labels,
    verify,
)

__all__ = [
    "Error",
    "Family",
    "load_checkpoint",
    "load_mnist",
    "log_softmax",
    "lr_at",
    "matmul",
    "nll_loss",
    "parse_idx_images",
    "parse_idx_labels",
    "verify",
]
