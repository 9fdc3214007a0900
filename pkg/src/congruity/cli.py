"""Command line driver.

Subcommands: ``train``, ``eval``, ``gen-synth``, ``gradcheck``,
``dump-congruity``. Configuration flags mirror the Config fields in
kebab-case; ``--config FILE`` loads key=value pairs first and explicit
flags override them. Exit codes: 0 success, 1 validation error, 2 I/O or
file-format error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields
from pathlib import Path

from .config import Config, load_config_file
from .data import load_manifest
from .dump import dump_congruity
from .errors import (ConfigError, ContractError, DataError, FormatError,
                     ShapeError)
from .gradcheck import DEFAULT_THRESHOLD, check_model_gradients
from .model import count_params
from .rng import stream
from .synth import SyntheticSpec, write_synthetic
from .train import Checkpoint, evaluate_checkpoint, train


class _Parser(argparse.ArgumentParser):
    # the CLI contract wants usage + exit 1 on bad flags (argparse defaults to 2)
    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="key=value config file")
    for field in fields(Config):
        flag = "--" + field.name.replace("_", "-")
        if field.type == "bool" or isinstance(field.default, bool):
            parser.add_argument(flag, action=argparse.BooleanOptionalAction, default=None)
        elif isinstance(field.default, int):
            parser.add_argument(flag, type=int, default=None)
        elif isinstance(field.default, float):
            parser.add_argument(flag, type=float, default=None)
        else:
            parser.add_argument(flag, type=str, default=None)


def _config_from_args(args: argparse.Namespace) -> Config:
    overrides: dict = {}
    if args.config:
        overrides.update(load_config_file(args.config))
    for field in fields(Config):
        value = getattr(args, field.name, None)
        if value is not None:
            overrides[field.name] = value
    return Config.from_dict(overrides)


def _resolve_manifest(path_arg: str) -> Path:
    path = Path(path_arg)
    if path.is_file():
        return path
    candidate = Path(f"{path_arg}.manifest.jsonl")
    if candidate.is_file():
        return candidate
    raise FormatError(f"no manifest found at {path_arg!r} (tried {path} and {candidate})")


def _load_dataset(path_arg: str, config: Config):
    return load_manifest(_resolve_manifest(path_arg),
                         max_text_len=config.max_text_len,
                         max_knowledge_len=config.max_knowledge_len)


def _cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    samples = _load_dataset(args.data, config)
    if args.dev:
        dev = _load_dataset(args.dev, config)
        train_set = samples
    else:
        # deterministic held-out split when no dev file is given
        order = stream(config.seed, "devsplit").permutation(len(samples))
        dev_count = max(1, int(len(samples) * args.dev_fraction))
        if dev_count >= len(samples):
            raise ConfigError("dataset too small to split a dev set; pass --dev")
        dev = [samples[i] for i in order[:dev_count]]
        train_set = [samples[i] for i in order[dev_count:]]
    checkpoint = train(config, train_set, dev)
    checkpoint.save(args.out)
    sys.stderr.write(f"saved checkpoint to {args.out} "
                     f"(best epoch {checkpoint.epoch}, "
                     f"dev accuracy {checkpoint.best_dev_accuracy:.4f})\n")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    samples = _load_dataset(args.data, checkpoint.config)
    metrics = evaluate_checkpoint(checkpoint, samples)
    print(json.dumps(metrics.to_dict(), sort_keys=True))
    return 0


def _cmd_gen_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        count=args.count,
        n_range=(args.n_min, args.n_max),
        p=args.p,
        m_range=(args.m_min, args.m_max),
        d_raw=args.d_raw,
        seed=args.seed,
        image_noise=args.image_noise,
    )
    manifest_path, blob_path = write_synthetic(spec, args.out)
    sys.stderr.write(f"wrote {manifest_path} and {blob_path} ({spec.count} samples)\n")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if getattr(args, "knowledge_enabled", None) is None:
        config.knowledge_enabled = True
    report = check_model_gradients(config, n=args.n, r=args.r, m=args.m,
                                   raw_width=args.raw_width)
    print(f"max relative error {report.max_rel_error:.3e} over "
          f"{report.component_count} components of {report.param_count} parameters "
          f"({report.seconds:.1f} s)")
    return 0 if report.passed else 1


def _cmd_dump_congruity(args: argparse.Namespace) -> int:
    checkpoint = Checkpoint.load(args.checkpoint)
    samples = _load_dataset(args.data, checkpoint.config)
    if args.sample is not None:
        matches = [s for s in samples if s.id == args.sample]
        if not matches:
            raise DataError(f"no sample with id {args.sample!r} in {args.data}")
        sample = matches[0]
    else:
        sample = samples[args.index]
    dump_congruity(checkpoint, sample, args.out)
    sys.stderr.write(f"wrote congruity dump for sample {sample.id!r} to {args.out}\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="congruity",
                     description="Hierarchical cross-modal congruity engine")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_train = sub.add_parser("train", help="train a model on a manifest+blob dataset")
    p_train.add_argument("--data", required=True, help="training manifest (or file prefix)")
    p_train.add_argument("--dev", help="dev manifest; defaults to a held-out split of --data")
    p_train.add_argument("--dev-fraction", type=float, default=0.2)
    p_train.add_argument("--out", default="model.hcec", help="checkpoint output path")
    _add_config_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.set_defaults(func=_cmd_eval)

    p_gen = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    p_gen.add_argument("--count", type=int, required=True)
    p_gen.add_argument("--out", required=True, help="output file prefix")
    p_gen.add_argument("--n-min", type=int, default=4)
    p_gen.add_argument("--n-max", type=int, default=10)
    p_gen.add_argument("--p", type=int, default=4)
    p_gen.add_argument("--m-min", type=int, default=3)
    p_gen.add_argument("--m-max", type=int, default=6)
    p_gen.add_argument("--d-raw", type=int, default=16)
    p_gen.add_argument("--image-noise", type=float, default=0.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen_synth)

    p_grad = sub.add_parser("gradcheck",
                            help="verify model gradients against finite differences")
    p_grad.add_argument("--n", type=int, default=4)
    p_grad.add_argument("--r", type=int, default=4)
    p_grad.add_argument("--m", type=int, default=3)
    p_grad.add_argument("--raw-width", type=int, default=6)
    _add_config_flags(p_grad)
    p_grad.set_defaults(func=_cmd_gradcheck)

    p_dump = sub.add_parser("dump-congruity", help="dump congruity maps for one sample")
    p_dump.add_argument("--checkpoint", required=True)
    p_dump.add_argument("--data", required=True)
    p_dump.add_argument("--sample", help="sample id (defaults to --index)")
    p_dump.add_argument("--index", type=int, default=0)
    p_dump.add_argument("--out", required=True, help="CSV output path")
    p_dump.set_defaults(func=_cmd_dump_congruity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1
    except (ConfigError, DataError, ShapeError, ContractError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (FormatError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
