"""Train a LeNet-5 digit classifier, attack it with FGSM, and harden it by
iteratively deleting the training examples whose adversarial counterparts
hurt the most."""

from .attack import AttackConfig, fgsm_dataset, fgsm_perturb
from .checkpoint import load_checkpoint, save_checkpoint
from .data import LabeledDataset, load_mnist, remove_by_id, subset
from .lenet import (
    LeNetClassifier,
    LeNetParams,
    backward_pass,
    evaluate,
    forward_logits,
    init_params,
    train_epochs,
)
from .ops import AdamState, adam_step, softmax_cross_entropy
from .unlearn import (
    HyperConfig,
    RoundMetrics,
    RunLog,
    score_adversarial_loss,
    select_top_k,
    unlearn_round,
    unlearn_until_robust,
)

__all__ = [
    "AttackConfig",
    "AdamState",
    "HyperConfig",
    "LabeledDataset",
    "LeNetClassifier",
    "LeNetParams",
    "RoundMetrics",
    "RunLog",
    "adam_step",
    "backward_pass",
    "evaluate",
    "fgsm_dataset",
    "fgsm_perturb",
    "forward_logits",
    "init_params",
    "load_checkpoint",
    "load_mnist",
    "remove_by_id",
    "save_checkpoint",
    "score_adversarial_loss",
    "select_top_k",
    "softmax_cross_entropy",
    "subset",
    "train_epochs",
    "unlearn_round",
    "unlearn_until_robust",
]

__version__ = "0.1.0"
