"""
cli/main.py - Command suite: data, training, search, security, daemons, attack, report.

Uso:
    python main.py data prepare --dataset mnist2 --data-dir ~/mnist
    python main.py search --dataset mnist2 --lambda 0.5 --episodes 200 --seed 7
    python main.py security --design runs/engine/best_acc.json --fleet fleet.json
    python main.py provider serve --profile qcp1 --port 7001 --log-file qcp1.jsonl
    python main.py report --out-dir runs

Exit status: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import sys

from data.datasets import prepare
from engine.design_env import QuantumEvaluator, TabularEvaluator
from engine.search import run_random_search, run_search, run_single_provider_nas, write_outputs
from model.backbone import build_backbone
from model.design import Model, ModelDesign, materialize
from model.inference import accuracy
from model.trainer import train
from networking.dispatch import Fleet
from settings import (
    ATTACK_JSON, DATASETS, EXACT, FLEET_SIZES, LOG_FORMAT, MODEL_JSON, NAIVE5_TEMPLATE, SECURITY_JSON,
)
from utils.base_path import read_version

from cli.config import ConfigError, RunConfig

log = logging.getLogger("splitq.cli")

PRESETS = ("naive5",)


# ──────────────────────────────────────────────
# Parser
# ──────────────────────────────────────────────
def _shots(value: str):
    if value == EXACT:
        return EXACT
    try:
        shots = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shots must be a positive integer or '{EXACT}'")
    if shots < 1:
        raise argparse.ArgumentTypeError("shots must be positive")
    return shots


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="Run config JSON (default: config.json at the repo root)")
    p.add_argument("--data-dir", help="Directory with the IDX files")
    p.add_argument("--dataset", choices=sorted(DATASETS), help="Dataset name")
    p.add_argument("--seed", type=int, help="Seed for every random choice")
    p.add_argument("--shots", type=_shots, help=f"Shots per job, or '{EXACT}'")
    p.add_argument("--fast", action="store_true", help="Short training (5 epochs, 100 samples)")
    p.add_argument("--providers", type=int, choices=sorted(FLEET_SIZES),
                   help="Use the built-in fleet of this size")
    p.add_argument("--fleet", help="Fleet JSON file (provider profiles)")
    p.add_argument("--out-dir", help="Output root (searches write to <out-dir>/engine, random, nas-<provider>)")
    p.add_argument("--eval-cap", type=int, help="Score on the first N test samples only")
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    return p


def _search_flags(p: argparse.ArgumentParser):
    p.add_argument("--lambda", dest="lam", type=float, help="Weight of SecMec in the reward")
    p.add_argument("--episodes", type=int, help="Search episodes")
    p.add_argument("--objective", choices=("quantum", "tabular"), default="quantum",
                   help="Score designs by training them (quantum) or with a seeded table (tabular)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="splitq", description="Distributed QML model security")
    parser.add_argument("--version", action="version", version=f"splitq {read_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    data = sub.add_parser("data", help="Dataset utilities")
    data_sub = data.add_subparsers(dest="action", required=True)
    data_sub.add_parser("prepare", parents=[common], help="Load, filter and downsample a dataset")

    for name, helptext in (("train", "Train a design"), ("evaluate", "Accuracy locally and on the fleet"),
                           ("security", "SecMec report of a deployed model"),
                           ("attack-demo", "Steal circuits from provider logs")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--design", required=True,
                       help=f"Design or model JSON, or a preset: {', '.join(PRESETS)}")
        if name == "attack-demo":
            p.add_argument("--log-dir", help="Where the providers write their JSONL circuit logs")

    for name, helptext in (("search", "Security-aware design search"),
                           ("random-search", "Uniform random designs"),
                           ("nas-single", "Template search pinned to one provider")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        _search_flags(p)
        if name == "nas-single":
            p.add_argument("--provider", help="Provider to pin (default: every provider in turn)")

    provider = sub.add_parser("provider", help="Provider daemons")
    provider_sub = provider.add_subparsers(dest="action", required=True)
    serve = provider_sub.add_parser("serve", parents=[common], help="Run one provider daemon")
    serve.add_argument("--profile", required=True, help="Provider id from the fleet (e.g. qcp1)")
    serve.add_argument("--host", help="Bind address")
    serve.add_argument("--port", type=int, help="TCP port (default: from the profile)")
    serve.add_argument("--log-file", help="Append every received job to this JSONL file")

    report = sub.add_parser("report", parents=[common], help="Figures and summary from run outputs")
    report.add_argument("--naive", help="Security report JSON of the naive design")
    report.add_argument("--report-dir", help="Where to write the figures (default: <out-dir>/report)")
    return parser


# ──────────────────────────────────────────────
# Shared plumbing
# ──────────────────────────────────────────────
def _setup_logging(verbose: bool):
    logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger("splitq").setLevel(logging.DEBUG if verbose else logging.INFO)


def load_config(args) -> RunConfig:
    cfg = RunConfig(args.config, explicit=args.config is not None)
    cfg.set("dataset", args.dataset)
    cfg.set("seed", args.seed)
    cfg.set("shots", args.shots)
    cfg.set("out_dir", args.out_dir)
    if args.providers is not None:
        cfg.use_builtin_fleet(args.providers)
    cfg.set("fleet", args.fleet)
    cfg.set("search.lambda", getattr(args, "lam", None))
    cfg.set("search.episodes", getattr(args, "episodes", None))
    return cfg


def _datasets(cfg: RunConfig, args):
    trainset, testset = prepare(cfg.dataset, cfg.data_dir(args.data_dir), cfg.seed)
    if args.eval_cap:
        testset = testset.head(args.eval_cap)
    return trainset, testset


def _train_config(cfg: RunConfig, args):
    if args.fast:
        return dataclasses.replace(cfg.search, fast=True).train_config
    return cfg.train


@contextlib.contextmanager
def open_fleet(cfg: RunConfig, log_dir: str | None = None):
    """Fleet for the configured transport, closed on exit."""
    profiles = cfg.profiles
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    if cfg.transport == "tcp":
        from server.fleet_manager import LocalFleet
        with LocalFleet(profiles, log_dir=log_dir) as local:
            yield local.fleet
        return
    fleet = Fleet.loopback(profiles, log_dir) if cfg.transport == "loopback" else Fleet.remote(profiles)
    try:
        yield fleet
    finally:
        fleet.close()


def preset_design(name: str, providers: list[str]) -> ModelDesign:
    """naive5: five nodes with one template, providers split 2/2/1 by branch."""
    if name != "naive5":
        raise ValueError(f"unknown preset {name!r}")
    bb = build_backbone(3)
    arch = {n: (0 if n in (5, 7) else NAIVE5_TEMPLATE) for n in bb.nodes}
    pick = [providers[i % len(providers)] for i in range(3)]
    owner = {4: pick[0], 2: pick[0], 6: pick[1], 3: pick[1], 1: pick[2], 5: pick[0], 7: pick[1]}
    return ModelDesign(bb, arch, owner)


def load_model(spec: str, cfg: RunConfig, args, trainset, providers: list[str]) -> Model:
    """A trained model from a preset, a design file or a model file."""
    n_classes = trainset.n_classes
    if spec in PRESETS:
        design = preset_design(spec, providers)
    else:
        with open(spec, "r", encoding="utf-8") as f:
            data = json.load(f)
        if "params" in data:
            model = Model.from_dict(data)
            if model.n_classes != n_classes:
                raise ValueError(f"{spec} has {model.n_classes} classes, {cfg.dataset} has {n_classes}")
            return model
        design = ModelDesign.from_dict(data)
    model = materialize(design.backbone, design.arch, design.provider, cfg.seed,
                        n_classes=n_classes, device_map=design.device)
    log.info("training %d-node design on %s", len(model.nodes), cfg.dataset)
    return train(model, trainset, _train_config(cfg, args), cfg.seed)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _write_json(obj, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


# ──────────────────────────────────────────────
# Commands
# ──────────────────────────────────────────────
def cmd_data_prepare(cfg: RunConfig, args) -> int:
    trainset, testset = _datasets(cfg, args)
    _emit({"dataset": cfg.dataset, "n_classes": trainset.n_classes,
           "train": len(trainset), "test": len(testset),
           "train_counts": trainset.class_counts().tolist(),
           "test_counts": testset.class_counts().tolist()})
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    trainset, testset = _datasets(cfg, args)
    model = load_model(args.design, cfg, args, trainset, [p.provider for p in cfg.profiles])
    path = _write_json(model.to_dict(), os.path.join(cfg.out_dir, MODEL_JSON))
    _emit({"acc": accuracy(model, testset), "n_nodes": len(model.nodes),
           "n_params": model.n_params, "path": path})
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    trainset, testset = _datasets(cfg, args)
    with open_fleet(cfg, cfg.log_dir) as fleet:
        model = load_model(args.design, cfg, args, trainset, fleet.providers)
        acc_fleet = accuracy(model, testset, fleet.env(cfg.shots, cfg.seed))
    _emit({"acc_local": accuracy(model, testset), "acc_fleet": acc_fleet,
           "shots": cfg.shots, "providers": model.design.providers_used})
    return 0


def cmd_security(cfg: RunConfig, args) -> int:
    from security.evaluator import measure_security

    trainset, testset = _datasets(cfg, args)
    with open_fleet(cfg, cfg.log_dir) as fleet:
        model = load_model(args.design, cfg, args, trainset, fleet.providers)
        report = measure_security(model, testset, fleet.profiles, cfg.shots, cfg.seed,
                                  env=fleet.env(cfg.shots, cfg.seed), workers=cfg.search.workers)
    print(report.to_json())
    if args.out_dir:
        _write_json(report.to_dict(), os.path.join(args.out_dir, SECURITY_JSON))
    return 0


def cmd_search(cfg: RunConfig, args) -> int:
    config = dataclasses.replace(cfg.search, fast=args.fast)
    with contextlib.ExitStack() as stack:
        if args.objective == "tabular":
            providers = [p.provider for p in cfg.profiles]
            evaluator = TabularEvaluator(2 ** config.depth - 1, len(providers), config.seed)
        else:
            trainset, testset = _datasets(cfg, args)
            fleet = stack.enter_context(open_fleet(cfg, cfg.log_dir))
            providers = fleet.providers
            evaluator = QuantumEvaluator(trainset, testset, fleet, _train_config(cfg, args),
                                         cfg.shots, config.workers)

        if args.command == "search":
            runs = {"engine": run_search(config, evaluator, providers, progress=True)}
        elif args.command == "random-search":
            runs = {"random": run_random_search(config, evaluator, providers, progress=True)}
        else:
            targets = [args.provider] if args.provider else providers
            runs = {f"nas-{p}": run_single_provider_nas(config, evaluator, providers, p, progress=True)
                    for p in targets}

    for name, result in runs.items():
        write_outputs(result, os.path.join(cfg.out_dir, name))
        best = result.best_acc
        log.info("%s best: acc %.4f sec_mec %.4f", name, best.acc, best.sec_mec)
    return 0


def cmd_provider_serve(cfg: RunConfig, args) -> int:
    from server.dedicated_server import run

    profiles = {p.provider: p for p in cfg.profiles}
    if args.profile not in profiles:
        log.error("no provider %r in the fleet (%s)", args.profile, ", ".join(sorted(profiles)))
        return 1
    return run(profiles[args.profile], args.host, args.port, args.log_file)


def pin_to_provider(model: Model, provider: str) -> Model:
    """Same trained model with every node on `provider`."""
    design = model.design
    pinned = ModelDesign(design.backbone, dict(design.arch), {n: provider for n in design.arch})
    return Model(pinned, {k: v.copy() for k, v in model.params.items()},
                 list(model.topo_order), list(model.sinks), model.n_classes)


def cmd_attack_demo(cfg: RunConfig, args) -> int:
    from redteam.attack import distributed_attack, read_circuit_log, single_provider_attack

    trainset, testset = _datasets(cfg, args)
    log_dir = args.log_dir or cfg.log_dir
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        for p in cfg.profiles:
            open(os.path.join(log_dir, f"{p.provider}.jsonl"), "w").close()

    probe = testset.features[0]
    with open_fleet(cfg, log_dir) as fleet:
        model = load_model(args.design, cfg, args, trainset, fleet.providers)
        victim = model.design.providers_used[0]
        single = single_provider_attack(pin_to_provider(model, victim), fleet.profiles[victim],
                                        probe, cfg.shots, cfg.seed)
        logs = None
        if log_dir:
            from networking.dispatch import execute_distributed
            execute_distributed(model, probe, fleet, cfg.shots, cfg.seed)
            logs = {p: read_circuit_log(os.path.join(log_dir, f"{p}.jsonl"))
                    for p in model.design.providers_used}
        split = distributed_attack(model, fleet, testset, probe, cfg.shots, cfg.seed, logs=logs)

    result = {"single_provider": single.to_dict(), "distributed": split.to_dict(),
              "consistent": split.consistent()}
    _write_json(result, os.path.join(cfg.out_dir, ATTACK_JSON))
    _emit(result)
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    from cli.report import write_report

    paths = write_report(cfg.out_dir, args.report_dir, args.naive)
    _emit(paths)
    return 0


COMMANDS = {
    ("data", "prepare"): cmd_data_prepare,
    ("train", None): cmd_train,
    ("evaluate", None): cmd_evaluate,
    ("security", None): cmd_security,
    ("search", None): cmd_search,
    ("random-search", None): cmd_search,
    ("nas-single", None): cmd_search,
    ("provider", "serve"): cmd_provider_serve,
    ("attack-demo", None): cmd_attack_demo,
    ("report", None): cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    _setup_logging(args.verbose)

    handler = COMMANDS[(args.command, getattr(args, "action", None))]
    try:
        cfg = load_config(args)
        return handler(cfg, args)
    except ConfigError as e:
        log.error("%s", e)
        return 1
    except (ValueError, RuntimeError, OSError, KeyError) as e:
        log.error("%s failed: %s", args.command, e)
        log.debug("details", exc_info=True)
        return 1
