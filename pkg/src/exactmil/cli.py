"""Command-line interface.

Exit codes: 0 ok, 1 malformed input, 2 zero probability, 3 subset-order or
enumeration guard exceeded, 4 training diverged.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import errors
from .decode import (
    EmissionMap,
    collapse_transcribe,
    column_sequence,
    emission_map,
    transcription_string,
)
from .likelihood import (
    MAX_SUBSET_ORDER,
    brute_force_likelihood,
    likelihood_beta,
    likelihood_exact,
    likelihood_upper_bound,
)
from .tensor import LogitTensor, load_label_set, softmax_locations, tensor_from_json
from .verify import SUITES

EXIT_OK, EXIT_INPUT, EXIT_ZERO, EXIT_GUARD, EXIT_DIVERGED = range(5)


def _emit(args, payload: dict, human: str) -> None:
    if args.format == "json":
        print(json.dumps(payload))
    else:
        print(human)


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise errors.InvalidTensor(f"cannot read {path}: {exc}") from exc


def _prob_tensor(doc: dict):
    T = tensor_from_json(doc)
    return softmax_locations(T) if isinstance(T, LogitTensor) else T


def cmd_likelihood(args) -> int:
    P = _prob_tensor(_read_json(args.tensor))
    try:
        labels = load_label_set(args.labels)
    except (OSError, json.JSONDecodeError) as exc:
        raise errors.LabelOutOfRange(f"cannot read {args.labels}: {exc}") from exc
    if args.method == "exact":
        result = likelihood_exact(labels, P, args.max_order)
    elif args.method == "beta":
        result = likelihood_beta(labels, P, args.max_order)
    elif args.method == "brute":
        result = brute_force_likelihood(labels, P)
    else:
        if args.k is None:
            raise errors.MilError("--method bound needs --k")
        result = likelihood_upper_bound(labels, P, args.k, args.max_order)
    payload = result.to_dict()
    logprob = "-inf" if result.is_zero else repr(result.logprob)
    _emit(args, payload, f"logprob {logprob}  method {result.method}  "
                         f"terms {result.terms_evaluated}")
    return EXIT_ZERO if result.is_zero else EXIT_OK


def cmd_verify(args) -> int:
    suite = SUITES[args.suite]
    kwargs = {"seed": args.seed}
    if args.trials is not None:
        kwargs["trials"] = args.trials
    if args.tolerance is not None:
        kwargs["tol"] = args.tolerance
    report = suite(**kwargs)
    if args.log:
        Path(args.log).write_text(report.to_log())
    s = report.summary()
    _emit(args, s, f"{s['suite']}: {s['checks'] - s['failures']}/{s['checks']} passed, "
                   f"worst error {s['worst_error']:.3e} (tolerance {s['tolerance']:.0e})")
    return EXIT_OK if report.passed else EXIT_INPUT


def _train_config(args):
    from .harness.training import TrainConfig

    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                       num_classes=args.num_classes, train_size=args.train_size,
                       test_size=args.test_size, loss=args.loss, optimizer=args.optimizer,
                       lr_high=args.lr[0], lr_low=args.lr[1])


def cmd_train(args) -> int:
    from .harness.training import evaluate, evaluation_sets, save_checkpoint, train

    config = _train_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = train(config, out / "metrics.jsonl", record_time=args.timing)
    save_checkpoint(result.params, config, out / "checkpoint.json")
    payload = {"checkpoint": str(out / "checkpoint.json"),
               "metrics": str(out / "metrics.jsonl"), "epochs": result.log}
    if args.evaluate:
        payload["evaluation"] = evaluate(result.params, *evaluation_sets(config)).to_dict()
    last = result.log[-1]
    _emit(args, payload, f"trained {config.epochs} epochs; final "
                         f"{'mean_nll' if 'mean_nll' in last else 'mean_cost'}="
                         f"{last.get('mean_nll', last.get('mean_cost')):.6f}; "
                         f"checkpoint {payload['checkpoint']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .harness.training import evaluate, evaluation_sets, load_checkpoint

    try:
        params, config = load_checkpoint(args.checkpoint)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise errors.InvalidTensor(f"cannot read checkpoint {args.checkpoint}: {exc}") from exc
    if args.seed is not None:
        config.seed = args.seed
    if args.test_size is not None:
        config.test_size = args.test_size
    metrics = evaluate(params, *evaluation_sets(config))
    # eval always prints JSON
    print(json.dumps(metrics.to_dict()))
    return EXIT_OK


def cmd_transcribe(args) -> int:
    doc = _read_json(args.input)
    if "cells" in doc:
        try:
            emap = EmissionMap.from_json(doc, args.num_classes)
        except (KeyError, TypeError, ValueError) as exc:
            raise errors.ShapeMismatch(f"malformed emission map: {exc}") from exc
    else:
        emap = emission_map(_prob_tensor(doc))
    labels = collapse_transcribe(column_sequence(emap), emap.background)
    text = transcription_string(labels, digits=args.digits)
    _emit(args, {"transcription": text, "labels": labels}, text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "json"), default="human")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="exactmil", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("likelihood", parents=[common], help="log-probability of a label set")
    p.add_argument("tensor", help="JSON tensor file (prob or logit)")
    p.add_argument("labels", help='JSON label-set file {"labels": [...]}')
    p.add_argument("--method", choices=("exact", "beta", "brute", "bound"), default="exact")
    p.add_argument("--k", type=int, help="truncation order for --method bound")
    p.add_argument("--max-order", type=int, default=MAX_SUBSET_ORDER)
    p.set_defaults(func=cmd_likelihood)

    p = sub.add_parser("verify", parents=[common], help="run a randomized property suite")
    p.add_argument("--suite", choices=sorted(SUITES), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--log", help="write per-case JSON lines here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", parents=[common], help="train the toy model on synthetic scenes")
    p.add_argument("--out", default="run", help="directory for checkpoint.json and metrics.jsonl")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--num-classes", type=int, default=5)
    p.add_argument("--train-size", type=int, default=6000)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--loss", choices=("exact", "mil"), default="exact")
    p.add_argument("--optimizer", choices=("normalized-sgd", "sgd"), default="normalized-sgd")
    p.add_argument("--lr", type=float, nargs=2, default=(0.01, 0.001),
                   metavar=("FIRST_HALF", "SECOND_HALF"))
    p.add_argument("--timing", action="store_true", help="record wall_ms in the metrics log")
    p.add_argument("--evaluate", action="store_true", help="evaluate after training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint (prints JSON)")
    p.add_argument("checkpoint")
    p.add_argument("--seed", type=int, help="override the checkpoint's seed for test data")
    p.add_argument("--test-size", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("transcribe", parents=[common],
                       help="collapse a tensor or emission map into a label string")
    p.add_argument("input", help="JSON tensor file or emission-map file")
    p.add_argument("--num-classes", type=int,
                   help="class count for emission maps lacking num_classes")
    p.add_argument("--digits", action="store_true", help="render label 10 as 0")
    p.set_defaults(func=cmd_transcribe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (errors.SubsetOrderExceeded, errors.EnumerationTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (errors.ZeroProbability, errors.ZeroProbabilitySample) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO
    except errors.DivergedObjective as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (errors.MilError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
