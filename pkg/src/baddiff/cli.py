# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# `baddiff` command-line interface.
#
# The effective configuration is built from the built-in defaults, then
# the JSON file given with `--config`, then every explicitly given flag.

import argparse
import json
import os
import sys
import typing

from baddiff import config as baddiff_config
from baddiff import error as baddiff_error
from baddiff import experiment as baddiff_experiment
from baddiff import logging as baddiff_logging
from baddiff import oracle as baddiff_oracle
from baddiff import sampling as baddiff_sampling
from baddiff import tensor_file as baddiff_tensor_file
from baddiff import version as baddiff_version

_logger = baddiff_logging._get_logger(__name__)

# flag destination -> (config section or None, field)
_OVERRIDES = {
    "seed": (None, "seed"),
    "output_dir": (None, "output_dir"),
    "heldout_count": (None, "heldout_count"),
    "dataset": ("dataset", "kind"),
    "count": ("dataset", "count"),
    "T": ("schedule", "T"),
    "beta_start": ("schedule", "beta_start"),
    "beta_end": ("schedule", "beta_end"),
    "poison_rate": ("poison", "rate"),
    "trigger": ("poison", "trigger_kind"),
    "trigger_size": ("poison", "trigger_size"),
    "target": ("poison", "target_kind"),
    "overlap": ("poison", "overlap"),
    "epochs": ("train", "epochs"),
    "lr": ("train", "lr"),
    "batch_size": ("train", "batch_size"),
    "checkpoint_every": ("train", "checkpoint_every"),
    "pretrain_epochs": ("pretrain", "epochs"),
    "sampler": ("sampler", "kind"),
    "num_samples": ("sampler", "num_samples"),
    "ddim_steps": ("sampler", "ddim_steps"),
    "defense_epochs": ("defense", "epochs"),
    "granularity": ("defense", "granularity"),
}

_EXIT_OK = 0
_EXIT_FAILURE = 1


def _add_experiment_options(parser):
    group = parser.add_argument_group("experiment options")
    group.add_argument("--heldout-count", type=int, help="number of held-out clean samples")
    group.add_argument("--dataset", choices=["ring", "shapes", "bars"], help="dataset kind")
    group.add_argument("--count", type=int, help="number of training samples")
    group.add_argument("--T", type=int, help="number of diffusion steps")
    group.add_argument("--beta-start", type=float, help="first β of the linear schedule")
    group.add_argument("--beta-end", type=float, help="last β of the linear schedule")
    group.add_argument("--poison-rate", type=float, help="fraction of poisoned samples")
    group.add_argument(
        "--trigger", choices=["coordinate", "grey_box", "stop_sign"], help="trigger kind"
    )
    group.add_argument("--trigger-size", type=int, help="trigger extent")
    group.add_argument(
        "--target", choices=["point", "no_shift", "shift", "corner", "stamp"], help="target kind"
    )
    group.add_argument(
        "--overlap",
        action="store_true",
        default=None,
        help="keep poisoned samples in the clean split too",
    )
    group.add_argument("--epochs", type=int, help="training epochs")
    group.add_argument("--lr", type=float, help="training learning rate")
    group.add_argument("--batch-size", type=int, help="training batch size")
    group.add_argument("--checkpoint-every", type=int, help="checkpoint interval (epochs)")
    group.add_argument("--pretrain-epochs", type=int, help="clean pre-training epochs")
    group.add_argument("--sampler", choices=["ancestral", "clipped", "ddim"], help="sampler")
    group.add_argument("--num-samples", type=int, help="chains per sample batch")
    group.add_argument("--ddim-steps", type=int, help="DDIM subsequence length")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="baddiff", description="Backdoor attacks on desk-scale diffusion models."
    )
    parser.add_argument(
        "-V", "--version", action="version", version=baddiff_version.__version__
    )
    parser.add_argument(
        "-l",
        "--log-level",
        metavar="LVL",
        type=baddiff_logging.parse_logging_level,
        help="log level (TRACE, DEBUG, INFO, WARNING, ERROR, FATAL, NONE or T, D, I, W, E, F, N)",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="equivalent to --log-level=INFO"
    )
    parser.add_argument("-c", "--config", metavar="PATH", help="JSON experiment configuration")
    parser.add_argument("-o", "--output-dir", metavar="DIR", help="run directory")
    parser.add_argument("-s", "--seed", type=int, help="master seed")

    sub = parser.add_subparsers(dest="command", metavar="CMD")
    sub.required = True

    p = sub.add_parser("train", help="train a backdoored model from scratch")
    _add_experiment_options(p)

    p = sub.add_parser("finetune", help="fine-tune a clean model into a backdoored one")
    p.add_argument("--checkpoint", metavar="PATH", help="clean checkpoint to start from")
    _add_experiment_options(p)

    p = sub.add_parser("sample", help="sample from a checkpoint")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--triggered", action="store_true", help="start chains from triggered noise")
    p.add_argument("--out", metavar="PATH", help="tensor file to write")
    _add_experiment_options(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    _add_experiment_options(p)

    p = sub.add_parser("defend-anp", help="adversarial weight-perturbation search")
    p.add_argument("--checkpoint", metavar="PATH", help="backdoored checkpoint")
    p.add_argument("--budget", type=float, action="append", help="perturbation budget")
    p.add_argument("--defense-lr", type=float, action="append", help="ascent learning rate")
    p.add_argument("--defense-epochs", type=int, help="ascent epochs")
    p.add_argument("--granularity", choices=["weight", "neuron"], help="multiplier granularity")
    _add_experiment_options(p)

    p = sub.add_parser("verify", help="run the numerical self-checks")
    p.add_argument("--quick", action="store_true", help="fewer cases and draws")

    p = sub.add_parser("sweep", help="run one experiment per parameter value")
    p.add_argument("--over", choices=list(baddiff_experiment.SWEEP_OVER), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    _add_experiment_options(p)

    return parser


def _effective_config(args, **forced) -> baddiff_config.ExperimentConfig:
    if args.config is not None:
        base = baddiff_config.load_config(args.config)
    else:
        base = baddiff_config.ExperimentConfig()

    d = base.to_dict()

    for dest, (section, field) in _OVERRIDES.items():
        value = getattr(args, dest, None)

        if value is None:
            continue

        if section is None:
            d[field] = value
        else:
            d[section][field] = value

    # forced values use "section.field" keys and may be None
    for key, value in forced.items():
        section, field = key.split(".")
        d[section][field] = value

    return baddiff_config.ExperimentConfig.from_dict(d)


def _print_report(report):
    sys.stdout.write(report.to_json())


def _cmd_train(args):
    cfg = _effective_config(args, **{"train.mode": "scratch", "train.checkpoint_in": None})
    _print_report(baddiff_experiment.run_experiment(cfg).report)


def _cmd_finetune(args):
    forced = {"train.mode": "finetune"}

    if args.checkpoint is not None:
        forced["train.checkpoint_in"] = args.checkpoint

    cfg = _effective_config(args, **forced)
    _print_report(baddiff_experiment.run_experiment(cfg).report)


def _cmd_sample(args):
    cfg = _effective_config(args)
    params = baddiff_experiment.load_model(cfg, args.checkpoint)
    n = cfg.sampler.num_samples
    seeds = baddiff_sampling.draw_chain_seeds(baddiff_config.seed_stream(cfg.seed, "sample"), n)
    trigger = cfg.poison_spec().trigger if args.triggered else None
    samples = baddiff_sampling.sample_chains(
        params, cfg.schedule.build(), cfg.data_shape, n, cfg.sampler, seeds, trigger
    )
    out = args.out

    if out is None:
        os.makedirs(cfg.output_dir, exist_ok=True)
        name = "samples_triggered.bdtf" if args.triggered else "samples_clean.bdtf"
        out = os.path.join(cfg.output_dir, name)

    baddiff_tensor_file.save_tensors(out, samples)
    _logger.info("wrote %d samples to `%s`", n, out)


def _cmd_eval(args):
    cfg = _effective_config(args)
    params = baddiff_experiment.load_model(cfg, args.checkpoint)
    report, _ = baddiff_experiment.evaluate(cfg, params)
    os.makedirs(cfg.output_dir, exist_ok=True)

    with open(os.path.join(cfg.output_dir, "metrics.json"), "w", encoding="utf-8") as f:
        f.write(report.to_json())

    _print_report(report)


def _cmd_defend_anp(args):
    cfg = _effective_config(args)
    params = None

    if args.checkpoint is not None:
        params = baddiff_experiment.load_model(cfg, args.checkpoint)

    results = baddiff_experiment.run_defense(cfg, args.budget, args.defense_lr, params)
    summary = {}

    for (budget, lr), res in sorted(results.items()):
        key = "budget={:g},lr={:g}".format(budget, lr)
        summary[key] = None if res is None else {"best_epoch": res.best_epoch, "mse": res.mse}

    sys.stdout.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")


def _cmd_verify(args):
    seed = 0 if args.seed is None else args.seed
    rows = baddiff_oracle.run_verification(seed, args.quick)
    width = max(len(r.name) for r in rows)
    header = ("check", "max error", "tolerance", "result")
    print("{:<{w}}  {:>12}  {:>10}  {}".format(*header, w=width))

    for r in rows:
        print(
            "{:<{w}}  {:>12.3e}  {:>10.1e}  {}".format(
                r.name, r.max_error, r.tolerance, "pass" if r.passed else "FAIL", w=width
            )
        )

    worst = max(r.max_error / r.tolerance for r in rows)
    print(
        "{} of {} checks passed; worst error/tolerance ratio {:.3g}".format(
            sum(r.passed for r in rows), len(rows), worst
        )
    )
    return _EXIT_OK if all(r.passed for r in rows) else _EXIT_FAILURE


def _cmd_sweep(args):
    cfg = _effective_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    results = baddiff_experiment.run_sweep(cfg, args.over, values)
    out = {str(v): r.report.values for v, r in results}
    sys.stdout.write(json.dumps(out, sort_keys=True, indent=2) + "\n")


_COMMANDS = {
    "train": _cmd_train,
    "finetune": _cmd_finetune,
    "sample": _cmd_sample,
    "eval": _cmd_eval,
    "defend-anp": _cmd_defend_anp,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.log_level is not None:
        baddiff_logging.set_global_logging_level(args.log_level)
    elif args.verbose:
        baddiff_logging.set_global_logging_level(baddiff_logging.LoggingLevel.INFO)

    try:
        status = _COMMANDS[args.command](args)
    except (baddiff_error._Error, OSError) as exc:
        print("baddiff: error: {}".format(exc), file=sys.stderr)
        return _EXIT_FAILURE

    return _EXIT_OK if status is None else status
