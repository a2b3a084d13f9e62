"""Command-line front end: train, eval, export-curves, weights-snapshot, count-params.

Exit codes: 0 success, 2 user error (bad config, bad arguments, mismatched
files), 3 I/O or environment failure.  All randomness flows from explicit
seeds; rerunning a command with the same inputs reproduces its output files
byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from .envs import SPECS
from .evolve import RunConfig, run_evolution
from .fitness import LifetimeConfig
from .genome import (ArchConfig, ConfigurationError, LayoutError,
                     describe_parameter_count, load_genome)
from .protocols import (EvalProtocol, export_curves, run_protocol, weights_snapshot,
                        write_curves_csv, write_eval_csv, write_matrix_csv)
from .variants import VariantSpec, load_symla, variant_parameter_count

PROTOCOL_ALIASES = {
    "random": "random_adjacency",
    "fixed": "fixed_adjacency",
    "permuted": "permuted_io",
}


class UserError(Exception):
    """Invalid configuration or arguments; exits with code 2."""


_RUN_KEYS = {
    "environments": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
    "generations": int,
    "population": int,
    "master_seed": int,
    "output_dir": Path,
    "checkpoint_every": int,
    "sigma0": float,
    "workers": int,
    "eval_repeats": int,
    "common_random_numbers": lambda s: s.strip().lower() in ("1", "true", "yes"),
    "early_stop_mean_norm": float,
}
_ARCH_KEYS = {
    "activation_size": int,
    "n_total_neurons": int,
    "n_micro_ticks": int,
    "sparsity": float,
    "lr_constant": float,
    "n_neuron_types": int,
    "n_synapse_types": int,
}
_VARIANT_KEYS = {"kind": str, "fixed_adjacency_seed": int}
_LIFETIME_KEYS = {"n_episodes": int}
_SECTIONS = {
    "run": _RUN_KEYS,
    "arch": _ARCH_KEYS,
    "variant": _VARIANT_KEYS,
    "lifetime": _LIFETIME_KEYS,
}


def parse_run_config(path: Path) -> RunConfig:
    """Strict INI-style config: unknown sections or keys are hard errors."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise UserError(f"config parse error in {path}: {exc}") from exc

    values: dict[str, dict] = {name: {} for name in _SECTIONS}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise UserError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            convert = _SECTIONS[section].get(key)
            if convert is None:
                raise UserError(f"{path}: unknown key {key!r} in section [{section}]")
            try:
                values[section][key] = convert(raw)
            except ValueError as exc:
                raise UserError(
                    f"{path}: bad value for [{section}] {key} = {raw!r}: {exc}"
                ) from exc

    try:
        variant = VariantSpec(**values["variant"])
        arch = ArchConfig(**values["arch"])
        lifetime = LifetimeConfig(**values["lifetime"])
        return RunConfig(variant=variant, arch=arch, lifetime=lifetime,
                         **values["run"])
    except (ConfigurationError, TypeError, ValueError) as exc:
        raise UserError(f"{path}: {exc}") from exc


def load_policy_file(path: Path):
    """Load evolved parameters; returns a typed-network genome or LSTM baseline."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UserError(f"{path}: not a valid parameter file: {exc}") from exc
    model = doc.get("model", "sfnn")
    try:
        if model == "symla":
            return load_symla(path)
        return load_genome(path)
    except (LayoutError, ConfigurationError, KeyError) as exc:
        raise UserError(f"{path}: {exc}") from exc


# -- subcommands -----------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = parse_run_config(Path(args.config))
    if args.out is not None:
        cfg.output_dir = Path(args.out)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    run_evolution(cfg, verbose=not args.quiet)
    print(cfg.output_dir)
    return 0


def cmd_eval(args) -> int:
    params = load_policy_file(Path(args.genome))
    if args.env not in SPECS:
        raise UserError(f"unknown environment {args.env!r}")
    spec = SPECS[args.env]
    kind = PROTOCOL_ALIASES[args.protocol]
    fixed_seed = args.fixed_seed
    if kind == "fixed_adjacency" and fixed_seed is None:
        raise UserError("--protocol fixed requires --fixed-seed")
    protocol = EvalProtocol(kind=kind, n_lifetimes=args.lifetimes,
                            fixed_adjacency_seed=fixed_seed if kind == "fixed_adjacency" else None)
    lifetime_cfg = LifetimeConfig(n_episodes=args.episodes)
    result = run_protocol(params, spec, protocol, lifetime_cfg, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "episode_scores.csv"
    write_eval_csv(result, out_path)
    means = ", ".join(f"{m:.2f}" for m in result.per_episode_means)
    print(f"mean lifetime score: {result.mean_lifetime_score:.3f}")
    print(f"per-episode means:   {means}")
    print(out_path)
    return 0


def cmd_export_curves(args) -> int:
    for d in args.run_dirs:
        if not (Path(d) / "generation.csv").exists():
            raise UserError(f"{d}: no generation.csv found")
    header, rows = export_curves([Path(d) for d in args.run_dirs])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curves_csv(header, rows, out)
    print(out)
    return 0


def cmd_weights_snapshot(args) -> int:
    params = load_policy_file(Path(args.genome))
    from .genome import Genome
    if not isinstance(params, Genome):
        raise UserError("weights snapshots only apply to typed-network genomes")
    if args.env not in SPECS:
        raise UserError(f"unknown environment {args.env!r}")
    matrix = weights_snapshot(params, SPECS[args.env], args.seed, args.at_episode)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(matrix, out)
    print(out)
    return 0


def cmd_count_params(args) -> int:
    if args.config is not None:
        cfg = parse_run_config(Path(args.config))
        arch, variant = cfg.arch, cfg.variant
    else:
        arch = ArchConfig()
        variant = VariantSpec(kind=args.variant,
                              fixed_adjacency_seed=0 if args.variant == "fixed_adjacency" else None)
    n = variant_parameter_count(variant, arch)
    print(f"variant: {variant.kind}")
    if variant.kind == "symla":
        print(f"parameters: {n} total (one shared LSTM cell)")
    else:
        from .variants import apply_variant
        print(describe_parameter_count(apply_variant(variant, arch)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfnn",
                                     description="Evolve and evaluate structurally "
                                                 "flexible plastic networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run an evolution experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override output_dir")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a genome over many lifetimes")
    p.add_argument("--genome", required=True)
    p.add_argument("--env", required=True, choices=sorted(SPECS))
    p.add_argument("--protocol", required=True, choices=sorted(PROTOCOL_ALIASES))
    p.add_argument("--lifetimes", type=int, default=100)
    p.add_argument("--episodes", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-curves", help="aggregate generation logs across runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_curves)

    p = sub.add_parser("weights-snapshot",
                       help="dump the synapse-strength matrix after some episodes")
    p.add_argument("--genome", required=True)
    p.add_argument("--env", required=True, choices=sorted(SPECS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--at-episode", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_weights_snapshot)

    p = sub.add_parser("count-params", help="report the evolved-parameter count")
    p.add_argument("--config", default=None)
    p.add_argument("--variant", default="standard",
                   choices=("standard", "single_type", "fully_connected",
                            "fixed_adjacency", "symla"))
    p.set_defaults(func=cmd_count_params)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UserError, ConfigurationError, LayoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
