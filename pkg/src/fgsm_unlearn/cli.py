"""Command-line entry point.

Subcommands: synth-data, train, evaluate, attack, unlearn, report.
Exit codes: 0 success, 1 IO/data error, 2 invalid flags, 3 unlearning
stopped without reaching the target robustness. With --json all
machine-readable output goes to stdout and human text to stderr.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import checkpoint, data, synth
from .attack import AttackConfig, dump_pgm, fgsm_dataset
from .errors import FgsmUnlearnError, ValidationError
from .lenet import evaluate, init_params, train_epochs
from .ops import AdamState, per_example_cross_entropy
from .unlearn import REACHED_TAU, HyperConfig, unlearn_until_robust
from .lenet import forward_logits

DATA_DIR_ENV = "FGSM_UNLEARN_DATA"

EXIT_OK = 0
EXIT_IO = 1
EXIT_FLAGS = 2
EXIT_NOT_ROBUST = 3

# Published reference results for this protocol (clean model, attacked
# model, model after unlearning); report prints measured values next to
# them for comparison.
REFERENCE_RESULTS = {
    "Original": (0.9932, 0.0271),
    "Adversarial": (0.0796, 2.3045),
    "Updated": (0.9669, 0.1546),
}


def _say(args, msg: str) -> None:
    """Human-readable line; moves to stderr when --json owns stdout."""
    print(msg, file=sys.stderr if getattr(args, "json", False) else sys.stdout)


def _data_dir(args) -> str:
    d = args.data_dir or os.environ.get(DATA_DIR_ENV)
    if not d:
        raise ValidationError(f"no data directory: pass --data-dir or set {DATA_DIR_ENV}")
    if not os.path.isdir(d):
        raise FileNotFoundError(f"data directory not found: {d}")
    return d


def _load_train_test(args):
    train, test = data.load_mnist(_data_dir(args))
    if getattr(args, "subset", None) is not None:
        train = data.subset(train, args.subset, args.seed)
    return train, test


def cmd_synth_data(args) -> int:
    synth.generate_dataset_files(args.out_dir, args.n_train, args.n_test, args.seed)
    _say(args, f"wrote {args.n_train} train / {args.n_test} test examples to {args.out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    train, test = _load_train_test(args)
    params = init_params(args.seed)
    adam = AdamState.zeros_like(params.as_dict())
    params, adam, history = train_epochs(
        params, adam, train, args.epochs, args.batch, args.lr, args.seed
    )
    for rec in history:
        _say(
            args,
            f"epoch {rec.epoch}: loss={rec.mean_loss:.4f} acc={rec.accuracy:.4f} "
            f"({rec.wall_time_s:.1f}s)",
        )
    acc, loss = evaluate(params, test)
    meta = {
        "epochs": str(args.epochs),
        "batch_size": str(args.batch),
        "lr": repr(args.lr),
        "seed": str(args.seed),
        "train_size": str(len(train)),
    }
    checkpoint.save_checkpoint(params, adam, meta, args.out)
    _say(args, f"test accuracy={acc:.4f} loss={loss:.4f}; checkpoint -> {args.out}")
    if args.json:
        print(json.dumps({"accuracy": acc, "loss": loss, "checkpoint": args.out}))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _, test = _load_train_test(args)
    params, _, _ = checkpoint.load_checkpoint(args.model)
    acc, loss = evaluate(params, test)
    result = {"clean_accuracy": acc, "clean_loss": loss}
    _say(args, f"clean: accuracy={acc:.4f} loss={loss:.4f}")
    if args.fgsm:
        adv = fgsm_dataset(params, test, AttackConfig(args.epsilon))
        adv_acc, adv_loss = evaluate(params, adv)
        result.update(
            {"adversarial_accuracy": adv_acc, "adversarial_loss": adv_loss, "epsilon": args.epsilon}
        )
        _say(args, f"fgsm eps={args.epsilon}: accuracy={adv_acc:.4f} loss={adv_loss:.4f}")
    if args.json:
        print(json.dumps(result))
    return EXIT_OK


def cmd_attack(args) -> int:
    _, test = _load_train_test(args)
    params, _, _ = checkpoint.load_checkpoint(args.model)
    cfg = AttackConfig(args.epsilon)
    adv = fgsm_dataset(params, test, cfg)
    linf = np.abs(adv.images - test.images).reshape(len(test), -1).max(axis=1)
    examples = []
    correct = 0
    loss_sum = 0.0
    for start in range(0, len(adv), 256):
        logits = forward_logits(params, adv.images[start : start + 256])
        losses = per_example_cross_entropy(logits, adv.labels[start : start + 256])
        hits = logits.argmax(axis=1) == adv.labels[start : start + 256].argmax(axis=1)
        for j in range(len(losses)):
            i = start + j
            examples.append(
                {
                    "id": int(adv.ids[i]),
                    "loss": float(losses[j]),
                    "linf": float(linf[i]),
                    "correct": bool(hits[j]),
                }
            )
        correct += int(hits.sum())
        loss_sum += float(losses.sum(dtype=np.float64))
    report = {
        "epsilon": args.epsilon,
        "count": len(examples),
        "accuracy": correct / len(examples),
        "mean_loss": loss_sum / len(examples),
        "examples": examples,
    }
    with open(args.report, "w") as f:
        json.dump(report, f)
    _say(
        args,
        f"attacked {report['count']} examples: accuracy={report['accuracy']:.4f} "
        f"mean_loss={report['mean_loss']:.4f}; report -> {args.report}",
    )
    if args.dump_pgm:
        paths = dump_pgm(adv, args.dump_pgm, limit=args.dump_limit)
        _say(args, f"wrote {len(paths)} PGM files to {args.dump_pgm}")
    if args.json:
        print(json.dumps({k: report[k] for k in ("epsilon", "count", "accuracy", "mean_loss")}))
    return EXIT_OK


def cmd_unlearn(args) -> int:
    train, test = _load_train_test(args)
    params, adam, _ = checkpoint.load_checkpoint(args.model)
    cfg = HyperConfig(
        epsilon=args.epsilon,
        k=args.k,
        tau=args.tau,
        epochs_per_round=args.epochs_per_round,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        max_rounds=args.max_rounds,
        min_train_size=args.min_train_size,
        cold_start=args.cold_start,
    )
    params, log = unlearn_until_robust(params, adam, train, test, cfg, log_path=args.log)
    checkpoint.save_checkpoint(
        params, adam, {"rounds": str(len(log.rounds)), "status": log.terminal_status}, args.out
    )
    final_adv = log.rounds[-1].adv_acc if log.rounds else log.initial_adv_acc
    _say(
        args,
        f"{log.terminal_status} after {len(log.rounds)} rounds; "
        f"adversarial accuracy {final_adv:.4f} (target {cfg.tau}); "
        f"model -> {args.out}, log -> {args.log}",
    )
    if args.json:
        print(
            json.dumps(
                {
                    "terminal_status": log.terminal_status,
                    "rounds": len(log.rounds),
                    "adversarial_accuracy": final_adv,
                }
            )
        )
    return EXIT_OK if log.terminal_status == REACHED_TAU else EXIT_NOT_ROBUST


def _parse_log(path: str) -> tuple[dict | None, list[dict], dict | None]:
    initial, rounds, terminal = None, [], None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {e}") from None
            if rec.get("initial"):
                initial = rec
            elif "terminal_status" in rec:
                terminal = rec
            else:
                rounds.append(rec)
    return initial, rounds, terminal


def cmd_report(args) -> int:
    initial, rounds, terminal = _parse_log(args.log)
    if args.csv:
        print("round,train_size_before,removed,clean_acc,clean_loss,adv_acc,adv_loss")
        if initial:
            print(
                f"initial,{initial.get('train_size', '')},0,"
                f"{initial['clean_acc']:.6f},{initial['clean_loss']:.6f},"
                f"{initial['adv_acc']:.6f},{initial['adv_loss']:.6f}"
            )
        for r in rounds:
            print(
                f"{r['round']},{r['train_size_before']},{len(r['removed_ids'])},"
                f"{r['clean_acc']:.6f},{r['clean_loss']:.6f},"
                f"{r['adv_acc']:.6f},{r['adv_loss']:.6f}"
            )
        return EXIT_OK

    rows = []
    if initial:
        rows.append(("Original", initial["clean_acc"], initial["clean_loss"]))
        rows.append(("Adversarial", initial["adv_acc"], initial["adv_loss"]))
    if rounds:
        rows.append(("Updated", rounds[-1]["adv_acc"], rounds[-1]["adv_loss"]))
    print(f"{'Model':<14}{'Accuracy':>10}{'Loss':>10}{'Reference':>22}")
    for label, acc, loss in rows:
        ref_acc, ref_loss = REFERENCE_RESULTS[label]
        print(f"{label:<14}{acc:>10.4f}{loss:>10.4f}{ref_acc:>12.4f}{ref_loss:>10.4f}")
    if rounds:
        print("\nper-round adversarial accuracy trajectory:")
        for r in rounds:
            print(
                f"  round {r['round']}: train={r['train_size_before']} "
                f"clean={r['clean_acc']:.4f} adv={r['adv_acc']:.4f}"
            )
    if terminal:
        print(f"\nstatus: {terminal['terminal_status']} after {terminal['total_rounds']} rounds")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fgsm-unlearn",
        description="Train a LeNet-5 digit classifier, attack it with FGSM, "
        "and harden it by deleting the most-damaged training examples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_data=True, needs_model=False):
        if needs_data:
            p.add_argument("--data-dir", default=None, help=f"IDX directory (or ${DATA_DIR_ENV})")
            p.add_argument("--subset", type=int, default=None, help="train on a seeded subset")
        if needs_model:
            p.add_argument("--model", required=True, help="input checkpoint path")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--json", action="store_true", help="machine-readable stdout")

    p = sub.add_parser("synth-data", help="generate a synthetic digit corpus as IDX files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-train", type=int, default=12000)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--seed", type=int, default=123)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train from a fresh init and write a checkpoint")
    add_common(p)
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="clean (and optionally adversarial) test metrics")
    add_common(p, needs_model=True)
    p.add_argument("--fgsm", action="store_true", help="also evaluate under attack")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("attack", help="attack the test set and write a per-example report")
    add_common(p, needs_model=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--report", required=True, help="output report JSON path")
    p.add_argument("--dump-pgm", default=None, help="directory for perturbed-image PGM dumps")
    p.add_argument("--dump-limit", type=int, default=None)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("unlearn", help="iterative delete-and-retrain robustness loop")
    add_common(p, needs_model=True)
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--log", required=True, help="JSONL round log path")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--tau", type=float, default=0.9)
    p.add_argument("--max-rounds", type=int, default=50)
    p.add_argument("--epochs-per-round", type=int, default=15)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--min-train-size", type=int, default=1000)
    p.add_argument("--cold-start", action="store_true", help="reinit instead of warm-start")
    p.set_defaults(func=cmd_unlearn)

    p = sub.add_parser("report", help="summarize a round log as a table or CSV")
    p.add_argument("--log", required=True)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_FLAGS if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FLAGS
    except (FgsmUnlearnError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
