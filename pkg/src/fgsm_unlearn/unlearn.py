"""Iterative robustness loop: attack the training set, score the damage,
delete the worst offenders' clean originals, warm-start retrain, repeat
until adversarial test accuracy reaches the target or a budget runs out.

Scoring and deletion both operate on the training set; the test set is only
ever used for the stopping check and round metrics.
"""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .attack import AttackConfig, fgsm_dataset
from .data import LabeledDataset, remove_by_id
from .errors import DatasetFloorError, ValidationError
from .lenet import LeNetParams, evaluate, forward_logits, train_epochs
from .ops import AdamState, per_example_cross_entropy

REACHED_TAU = "reached_tau"
BUDGET_EXHAUSTED = "budget_exhausted"
DATASET_FLOOR = "dataset_floor"


@dataclass
class HyperConfig:
    epsilon: float = 0.1
    k: int = 100
    tau: float = 0.9
    epochs_per_round: int = 15
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 42
    max_rounds: int = 50
    min_train_size: int = 1000
    # retrain from a fresh init each round instead of warm-starting
    cold_start: bool = False

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau must be in [0, 1], got {self.tau}")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.max_rounds < 1:
            raise ValidationError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.min_train_size < self.k:
            raise ValidationError(
                f"min_train_size ({self.min_train_size}) must be >= k ({self.k})"
            )
        AttackConfig(self.epsilon)  # range check


@dataclass
class RoundMetrics:
    round: int
    train_size_before: int
    removed_ids: list[int]
    clean_acc: float
    clean_loss: float
    adv_acc: float
    adv_loss: float
    wall_time_s: float


@dataclass
class RunLog:
    config: HyperConfig
    initial_clean_acc: float = 0.0
    initial_clean_loss: float = 0.0
    initial_adv_acc: float = 0.0
    initial_adv_loss: float = 0.0
    rounds: list[RoundMetrics] = field(default_factory=list)
    terminal_status: str = ""


def score_adversarial_loss(
    params: LeNetParams, adv: LabeledDataset, batch_size: int = 256
) -> list[tuple[int, float]]:
    """Per-example cross-entropy on each adversarial image, in adv order."""
    out: list[tuple[int, float]] = []
    for start in range(0, len(adv), batch_size):
        logits = forward_logits(params, adv.images[start : start + batch_size])
        losses = per_example_cross_entropy(logits, adv.labels[start : start + batch_size])
        out.extend(
            (int(i), float(l)) for i, l in zip(adv.ids[start : start + batch_size], losses)
        )
    return out


def select_top_k(scores: list[tuple[int, float]], k: int) -> set[int]:
    """Ids of the k largest losses; ties broken toward the smaller id."""
    ranked = sorted(scores, key=lambda s: (-s[1], s[0]))
    return {sid for sid, _ in ranked[: max(k, 0)]}


def _evaluate_both(
    params: LeNetParams, test: LabeledDataset, cfg: HyperConfig
) -> tuple[float, float, float, float]:
    clean_acc, clean_loss = evaluate(params, test)
    adv_test = fgsm_dataset(params, test, AttackConfig(cfg.epsilon))
    adv_acc, adv_loss = evaluate(params, adv_test)
    return clean_acc, clean_loss, adv_acc, adv_loss


def unlearn_round(
    params: LeNetParams,
    adam: AdamState,
    train: LabeledDataset,
    test: LabeledDataset,
    cfg: HyperConfig,
    round_idx: int,
) -> tuple[LeNetParams, AdamState, LabeledDataset, RoundMetrics]:
    """One attack/score/delete/retrain cycle plus a test-set evaluation."""
    if len(train) - cfg.k < cfg.min_train_size:
        raise DatasetFloorError(
            f"removing {cfg.k} of {len(train)} examples would drop below the "
            f"floor of {cfg.min_train_size}"
        )
    t0 = time.monotonic()
    size_before = len(train)
    adv_train = fgsm_dataset(params, train, AttackConfig(cfg.epsilon))
    scores = score_adversarial_loss(params, adv_train)
    doomed = select_top_k(scores, cfg.k)
    survivors = remove_by_id(train, doomed)
    if cfg.cold_start:
        from .lenet import init_params

        params = init_params(cfg.seed)
        adam = AdamState.zeros_like(params.as_dict())
    params, adam, _ = train_epochs(
        params,
        adam,
        survivors,
        epochs=cfg.epochs_per_round,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        seed=cfg.seed + 1000 * (round_idx + 1),
    )
    clean_acc, clean_loss, adv_acc, adv_loss = _evaluate_both(params, test, cfg)
    metrics = RoundMetrics(
        round=round_idx,
        train_size_before=size_before,
        removed_ids=sorted(doomed),
        clean_acc=clean_acc,
        clean_loss=clean_loss,
        adv_acc=adv_acc,
        adv_loss=adv_loss,
        wall_time_s=time.monotonic() - t0,
    )
    return params, adam, survivors, metrics


def unlearn_until_robust(
    params: LeNetParams,
    adam: AdamState,
    train: LabeledDataset,
    test: LabeledDataset,
    cfg: HyperConfig,
    log_path: str | None = None,
) -> tuple[LeNetParams, RunLog]:
    """Run rounds until adv test accuracy >= tau, the round budget is spent,
    or deletion would breach the dataset floor. When log_path is given, the
    log is appended line by line so partial runs stay inspectable."""
    log = RunLog(config=cfg)
    (
        log.initial_clean_acc,
        log.initial_clean_loss,
        log.initial_adv_acc,
        log.initial_adv_loss,
    ) = _evaluate_both(params, test, cfg)
    if log_path:
        _append_jsonl(
            log_path,
            {
                "initial": True,
                "train_size": len(train),
                "clean_acc": log.initial_clean_acc,
                "clean_loss": log.initial_clean_loss,
                "adv_acc": log.initial_adv_acc,
                "adv_loss": log.initial_adv_loss,
                "epsilon": cfg.epsilon,
                "k": cfg.k,
                "tau": cfg.tau,
            },
            truncate=True,
        )

    adv_acc = log.initial_adv_acc
    round_idx = 0
    while True:
        if adv_acc >= cfg.tau:
            log.terminal_status = REACHED_TAU
            break
        if round_idx >= cfg.max_rounds:
            log.terminal_status = BUDGET_EXHAUSTED
            break
        if len(train) - cfg.k < cfg.min_train_size:
            log.terminal_status = DATASET_FLOOR
            break
        params, adam, train, metrics = unlearn_round(params, adam, train, test, cfg, round_idx)
        log.rounds.append(metrics)
        adv_acc = metrics.adv_acc
        if log_path:
            record = asdict(metrics)
            record["epsilon"] = cfg.epsilon
            record["k"] = cfg.k
            _append_jsonl(log_path, record)
        round_idx += 1

    if log_path:
        _append_jsonl(
            log_path, {"terminal_status": log.terminal_status, "total_rounds": len(log.rounds)}
        )
    return params, log


def _append_jsonl(path: str, record: dict, truncate: bool = False) -> None:
    with open(path, "w" if truncate else "a") as f:
        f.write(json.dumps(record) + "\n")
