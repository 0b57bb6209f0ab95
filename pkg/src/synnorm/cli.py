"""Command-line entry points.

    synnorm gensynth   --out DIR [--seed N --n-cuis N --syns-per-cui N --variation KINDS]
    synnorm fit-sparse --dictionary FILE --out FILE
    synnorm train      [--config FILE] [--dictionary ... --train ... --out DIR ...]
    synnorm eval       --checkpoint FILE --test FILE
    synnorm predict    --checkpoint FILE [--k N] MENTION
    synnorm candidates --run-dir DIR --mentions FILE

Exit status: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import synth
from .corpus import (
    CorpusError,
    load_dictionary,
    load_queries,
    load_substitution_map,
    merge_train_to_dictionary,
    normalize_text,
    write_dictionary,
)
from .dense import EncoderConfig, load_checkpoint, save_checkpoint
from .evaluation import evaluate
from .retrieval import SynonymIndex
from .sparse import fit_tfidf, save_tfidf
from .training import TrainConfig, flatten_components, positive_mask, train

logger = logging.getLogger("synnorm")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    dictionary: str = ""
    train: str = ""
    test: str = ""
    abbrev: str = ""
    spelling: str = ""
    out: str = ""
    head_len: int = 1
    # training
    k: int = 20
    alpha: float = 0.5
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 1e-5
    lambda_learning_rate: float = 1e-2
    weight_decay: float = 1e-2
    loss: str = "mml"
    seed: int = 0
    # encoder
    h: int = 64
    buckets: int = 65536
    max_chars: int = 100
    init_scale: float = 0.3
    w_init_scale: float = 0.75

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls().update(parse_kv_file(path))

    def update(self, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise UsageError(f"unknown config key {key!r}")
            kind = {"int": int, "float": float}.get(types[key], str)
            try:
                setattr(self, key, kind(raw))
            except ValueError:
                raise UsageError(f"bad value for {key}: {raw!r}") from None
        return self

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            k=self.k,
            alpha=self.alpha,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lambda_learning_rate=self.lambda_learning_rate,
            weight_decay=self.weight_decay,
            loss_kind=self.loss,
            seed=self.seed,
        )

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            h=self.h,
            buckets=self.buckets,
            seed=self.seed,
            max_chars=self.max_chars,
            init_scale=self.init_scale,
            w_init_scale=self.w_init_scale,
        )

    def validate(self) -> None:
        for key in ("dictionary", "train", "out"):
            if not getattr(self, key):
                raise UsageError(f"missing required setting {key!r}")
        for key in ("dictionary", "train", "test", "abbrev", "spelling"):
            path = getattr(self, key)
            if path and not Path(path).is_file():
                raise UsageError(f"{key} file not found: {path}")
        try:
            self.train_config().validate()
            self.encoder_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for key, value in asdict(self).items():
                fh.write(f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n")


def parse_kv_file(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _maps(cfg: RunConfig):
    abbrev = load_substitution_map(cfg.abbrev) if cfg.abbrev else {}
    spelling = load_substitution_map(cfg.spelling) if cfg.spelling else {}
    return abbrev, spelling


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg.update({k: v for k, v in _overrides(args).items() if v is not None})
    cfg.validate()

    abbrev, spelling = _maps(cfg)
    dictionary = load_dictionary(cfg.dictionary, abbrev, spelling)
    train_records = load_queries(cfg.train, abbrev, spelling, cfg.head_len)
    test_records = load_queries(cfg.test, abbrev, spelling, cfg.head_len) if cfg.test else None

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.txt")
    write_dictionary(dictionary, out / "dictionary.txt")
    merged = merge_train_to_dictionary(dictionary, train_records)
    write_dictionary(merged, out / "eval_dictionary.txt")
    save_tfidf(fit_tfidf(merged), out / "tfidf.tsv")

    metrics = open(out / "metrics.jsonl", "w", encoding="utf-8", newline="\n")

    def on_epoch(state, csets):
        save_checkpoint(out / f"epoch_{state.epoch:03d}.ckpt", state.encoder, state.lam_value)
        metrics.write(json.dumps(state.history[-1], sort_keys=True) + "\n")
        metrics.flush()

    with metrics:
        state = train(
            dictionary,
            train_records,
            cfg.train_config(),
            cfg.encoder_config(),
            eval_records=test_records,
            on_epoch=on_epoch,
        )
    save_checkpoint(out / "final.ckpt", state.encoder, state.lam_value)
    print(json.dumps(state.history[-1], sort_keys=True))
    return EXIT_OK


def _load_run(checkpoint):
    ckpt = Path(checkpoint)
    if not ckpt.is_file():
        raise UsageError(f"checkpoint not found: {ckpt}")
    run_dir = ckpt.parent
    cfg = RunConfig.from_file(run_dir / "config.txt")
    encoder, lam = load_checkpoint(ckpt)
    dictionary = load_dictionary(run_dir / "eval_dictionary.txt")
    index = SynonymIndex.build(dictionary, encoder)
    return cfg, encoder, lam, index


def cmd_eval(args) -> int:
    if not Path(args.test).is_file():
        raise UsageError(f"test file not found: {args.test}")
    cfg, encoder, lam, index = _load_run(args.checkpoint)
    abbrev, spelling = _maps(cfg)
    records = load_queries(args.test, abbrev, spelling, cfg.head_len)
    ks = [int(k) for k in args.k.split(",")]
    report = evaluate(index, records, encoder, lam, ks=ks, mode=args.mode)
    if args.failures:
        report.write_failures(args.failures, k=min(ks))
    print(report.to_json())
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg, encoder, lam, index = _load_run(args.checkpoint)
    abbrev, spelling = _maps(cfg)
    text = normalize_text(args.mention, abbrev, spelling)
    (pred,) = index.mips_infer([text], encoder, lam, k=args.k, mode=args.mode)
    names = index.dictionary.names
    sys.stdout.write("rank\tcui\tsynonym\tscore\n")
    for rank, (cui, i, s) in enumerate(zip(pred.cuis, pred.cui_synonym_ids, pred.cui_scores), 1):
        sys.stdout.write(f"{rank}\t{cui}\t{names[i]}\t{s!r}\n")
    return EXIT_OK


def cmd_candidates(args) -> int:
    run_dir = Path(args.run_dir)
    if not (run_dir / "config.txt").is_file():
        raise UsageError(f"not a training run directory: {run_dir}")
    if not Path(args.mentions).is_file():
        raise UsageError(f"mention file not found: {args.mentions}")
    cfg = RunConfig.from_file(run_dir / "config.txt")
    k = args.k or cfg.k
    alpha = cfg.alpha if args.alpha is None else args.alpha
    abbrev, spelling = _maps(cfg)
    dictionary = load_dictionary(run_dir / "dictionary.txt")
    records = load_queries(args.mentions, abbrev, spelling, cfg.head_len)
    texts, golds = flatten_components(records)
    index = SynonymIndex.build(dictionary)

    out = open(args.out, "w", encoding="utf-8", newline="\n") if args.out else sys.stdout
    out.write("epoch\tmention\trank\tsynonym\tcui\tis_positive\tsparse_score\tdense_score\n")
    for ckpt in sorted(run_dir.glob("epoch_*.ckpt")):
        epoch = int(ckpt.stem.split("_")[1])
        encoder, _ = load_checkpoint(ckpt)
        index.refresh_dense(encoder)
        csets = index.compose_candidates(texts, encoder, k, alpha)
        positive = positive_mask(csets, golds, dictionary)
        for text, cs, pos in zip(texts, csets, positive):
            for rank, (c, p) in enumerate(zip(cs.candidates, pos), 1):
                out.write(
                    f"{epoch}\t{text}\t{rank}\t{dictionary.names[c.synonym_id]}\t"
                    f"{dictionary.cuis[c.synonym_id]}\t{int(p)}\t"
                    f"{c.sparse_score!r}\t{c.dense_score!r}\n"
                )
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def cmd_gensynth(args) -> int:
    try:
        data = synth.generate(
            seed=args.seed,
            n_cuis=args.n_cuis,
            syns_per_cui=args.syns_per_cui,
            variations=args.variation,
            n_train=args.n_train,
            n_test=args.n_test,
            per_stem=args.per_stem,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    paths = data.write(args.out)
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return EXIT_OK


def cmd_fit_sparse(args) -> int:
    if not Path(args.dictionary).is_file():
        raise UsageError(f"dictionary not found: {args.dictionary}")
    save_tfidf(fit_tfidf(load_dictionary(args.dictionary)), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

_TRAIN_FLAGS = [
    ("--dictionary", str), ("--train", str), ("--test", str), ("--abbrev", str),
    ("--spelling", str), ("--out", str), ("--seed", int), ("--k", int),
    ("--alpha", float), ("--epochs", int), ("--batch-size", int),
    ("--learning-rate", float), ("--lambda-learning-rate", float),
    ("--weight-decay", float), ("--h", int), ("--buckets", int),
    ("--init-scale", float), ("--w-init-scale", float), ("--head-len", int),
]


def _overrides(args) -> dict:
    values = {flag[2:].replace("-", "_"): getattr(args, flag[2:].replace("-", "_"))
              for flag, _ in _TRAIN_FLAGS}
    values["loss"] = args.loss
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="synnorm", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model and write per-epoch checkpoints")
    p.add_argument("--config")
    for flag, kind in _TRAIN_FLAGS:
        p.add_argument(flag, type=kind)
    p.add_argument("--loss", choices=("mml", "hard_em", "pairwise"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Acc@k report as JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--k", default="1,5", help="comma-separated cutoffs")
    p.add_argument("--mode", default="hybrid", choices=("hybrid", "sparse", "dense"))
    p.add_argument("--failures", help="write a TSV of wrong mentions here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="top-k concepts for one mention")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--mode", default="hybrid", choices=("hybrid", "sparse", "dense"))
    p.add_argument("mention")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("candidates", help="dump training candidates for every epoch checkpoint")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--mentions", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("gensynth", help="write a synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-cuis", type=int, default=200)
    p.add_argument("--syns-per-cui", type=int, default=5)
    p.add_argument("--variation", default="suffix,reorder,typo")
    p.add_argument("--n-train", type=int, default=500)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--per-stem", type=int, default=4)
    p.set_defaults(func=cmd_gensynth)

    p = sub.add_parser("fit-sparse", help="fit and save the tf-idf model of a dictionary")
    p.add_argument("--dictionary", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_sparse)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"synnorm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, ValueError, OSError, RuntimeError) as exc:
        print(f"synnorm: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
