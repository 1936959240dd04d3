"""Command line entry point: preprocess, train, crossval, eval, predict.

Exit status is 0 on success, 2 on usage errors and 1 on domain errors; the
latter print a single ``error: <category>: <message>`` line to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from .dataset import load_dataset, split
from .errors import ArgumentError, BanglaToxicError
from .evaluation import check_vocab, evaluate, format_cv_report, format_report
from .network import init_params, load_params, model_forward, predict, save_params
from .optim import TrainConfig, cross_validate, load_config, train
from .pipeline import encode_comments, subset, vocab_from
from .tensor_core import SeededRng
from .text import preprocess
from .vocab import MAX_LEN, Vocabulary, encode

ENV_INPUT = "BANGLA_TOXIC_INPUT"
ENV_CHECKPOINT = "BANGLA_TOXIC_CHECKPOINT"

METHOD_NAMES = {
    "adam": "Bi-LSTM with Adam Optimiser",
    "sgd_momentum": "Bi-LSTM with momentum SGD",
}

# Stream keys under the run seed; keep stable, checkpoints depend on them.
STREAM_INIT, STREAM_SPLIT = 0, 4


def _timestamp(args) -> str | None:
    if args.no_timestamp:
        return None
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _config_from(args) -> TrainConfig:
    overrides = {
        "seed": args.seed,
        "optimizer": args.optimizer,
        "lr0": args.lr0,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "momentum": args.momentum,
        "clip_norm": args.clip_norm,
        "max_len": args.max_len,
    }
    if args.scheduler in ("on", "off"):
        overrides["scheduler"] = args.scheduler == "on"
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = replace(TrainConfig.paper_adam(), **{k: v for k, v in overrides.items() if v is not None})
    if args.scheduler == "auto":
        cfg = replace(cfg, scheduler=None)
    return cfg


def _log_epoch(r) -> None:
    print(f"epoch {r.epoch}: loss={r.train_loss:.4f} acc={r.train_acc:.4f} "
          f"val_loss={r.val_loss:.4f} val_acc={r.val_acc:.4f} lr={r.lr:.3g}", file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_preprocess(args) -> int:
    comments, report = load_dataset(args.input)
    vocab = vocab_from(comments)
    x, y = encode_comments(comments, vocab, args.max_len)
    vocab.save(args.vocab_out)
    header = "label," + ",".join(f"t{i + 1}" for i in range(args.max_len))
    rows = [header] + [f"{lab}," + ",".join(map(str, row)) for lab, row in zip(y, x)]
    _write(args.seq_out, "\n".join(rows) + "\n")
    text = report.to_text() + f"vocab_size: {vocab.size}\ngrid: {x.shape[0]}x{args.max_len}\n"
    if args.report_out:
        _write(args.report_out, text)
    sys.stdout.write(text)
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(args)
    comments, load_report = load_dataset(args.input)
    rng = SeededRng(cfg.seed)
    sp = split(len(comments), rng.derive(STREAM_SPLIT))
    train_part = subset(comments, sp.train_indices)
    test_part = subset(comments, sp.test_indices)
    vocab = vocab_from(train_part)
    tr = encode_comments(train_part, vocab, cfg.max_len)
    te = encode_comments(test_part, vocab, cfg.max_len)

    model = init_params(cfg.model_config(vocab.size), rng.derive(STREAM_INIT))
    params, history = train(model, tr, te, cfg, vocab=vocab, on_epoch=_log_epoch if args.verbose else None)
    params.meta["split_seed"] = cfg.seed

    ckpt = Path(args.checkpoint_out)
    vocab_path = Path(args.vocab_out or f"{ckpt}.vocab")
    save_params(params, ckpt)
    vocab.save(vocab_path)
    _write(args.history_out or f"{ckpt}.history.csv", history.to_csv())

    report = evaluate(params, te[0], te[1], vocab, batch_size=cfg.batch_size, threads=args.threads)
    meta = {"command": "train", "input": args.input, "optimizer": cfg.optimizer, "seed": cfg.seed,
            "subset": "test", "n_train": len(train_part), "n_test": len(test_part),
            "dropped_empty": load_report.dropped_empty}
    text = format_report(report, METHOD_NAMES[cfg.optimizer], meta, _timestamp(args))
    _write(args.report_out or f"{ckpt}.report.txt", text)
    sys.stdout.write(text)
    return 0


def cmd_crossval(args) -> int:
    cfg = _config_from(args)
    comments, _ = load_dataset(args.input)
    result = cross_validate(comments, cfg, k=args.k, threads=args.threads)
    meta = {"command": "crossval", "input": args.input, "optimizer": cfg.optimizer, "seed": cfg.seed}
    text = format_cv_report(result.reports, f"Bi-LSTM with {args.k}-Fold Cross Validation", meta, _timestamp(args))
    if args.report_out:
        _write(args.report_out, text)
    sys.stdout.write(text)
    return 0


def _load_model(args):
    params = load_params(args.checkpoint)
    vocab = Vocabulary.load(args.vocab or f"{args.checkpoint}.vocab")
    return params, vocab


def cmd_eval(args) -> int:
    params, vocab = _load_model(args)
    comments, _ = load_dataset(args.input)
    if args.subset == "test":
        seed = args.seed if args.seed is not None else params.meta.get("split_seed")
        if seed is None:
            raise ArgumentError("--subset test needs --seed (checkpoint records no split seed)")
        sp = split(len(comments), SeededRng(seed).derive(STREAM_SPLIT))
        comments = subset(comments, sp.test_indices)
    x, y = encode_comments(comments, vocab, params.config.max_len)
    report = evaluate(params, x, y, vocab, threads=args.threads)
    meta = {"command": "eval", "input": args.input, "subset": args.subset}
    text = format_report(report, "Bi-LSTM", meta, _timestamp(args))
    if args.report_out:
        _write(args.report_out, text)
    sys.stdout.write(text)
    return 0


def cmd_predict(args) -> int:
    params, vocab = _load_model(args)
    check_vocab(params, vocab)
    x = encode([preprocess(args.text)], vocab, params.config.max_len)
    prob = float(model_forward(x, params)[0][0])
    print(f"probability={prob:.8f} label={predict(prob, args.threshold)}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bangla-toxic",
        description="Bi-LSTM cyberbullying detector for Bangla social-media comments.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--no-timestamp", action="store_true", help="omit timestamps from reports")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--config", help="key=value config file")
    training.add_argument("--seed", type=int)
    training.add_argument("--optimizer", choices=["adam", "sgd_momentum"])
    training.add_argument("--lr0", type=float)
    training.add_argument("--epochs", type=int)
    training.add_argument("--batch-size", type=int)
    training.add_argument("--momentum", type=float)
    training.add_argument("--scheduler", choices=["on", "off", "auto"])
    training.add_argument("--clip-norm", type=float)
    training.add_argument("--max-len", type=int)

    env_input = os.environ.get(ENV_INPUT)
    env_ckpt = os.environ.get(ENV_CHECKPOINT)

    p = sub.add_parser("preprocess", help="clean, tokenize, stem and pad a comment file", parents=[common])
    p.add_argument("--input", default=env_input, required=env_input is None)
    p.add_argument("--vocab-out", required=True)
    p.add_argument("--seq-out", required=True)
    p.add_argument("--max-len", type=int, default=MAX_LEN)
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="80/20 split, train, write checkpoint and reports",
                       parents=[common, training])
    p.add_argument("--input", default=env_input, required=env_input is None)
    p.add_argument("--checkpoint-out", default=env_ckpt, required=env_ckpt is None)
    p.add_argument("--vocab-out")
    p.add_argument("--history-out")
    p.add_argument("--report-out")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("crossval", help="k-fold cross-validation", parents=[common, training])
    p.add_argument("--input", default=env_input, required=env_input is None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint", parents=[common])
    p.add_argument("--input", default=env_input, required=env_input is None)
    p.add_argument("--checkpoint", default=env_ckpt, required=env_ckpt is None)
    p.add_argument("--vocab", help="vocabulary file (default: CHECKPOINT.vocab)")
    p.add_argument("--subset", choices=["all", "test"], default="all")
    p.add_argument("--seed", type=int, help="split seed for --subset test (default: from checkpoint)")
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="score one comment")
    p.add_argument("--checkpoint", default=env_ckpt, required=env_ckpt is None)
    p.add_argument("--vocab")
    p.add_argument("--text", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_predict)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except BanglaToxicError as e:
        msg = str(e).replace("\n", " ")
        print(f"error: {e.category}: {msg}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
