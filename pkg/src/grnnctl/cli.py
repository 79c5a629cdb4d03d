"""Command-line harness.

Subcommands: ``gen`` (sample problem instances), ``benchmark`` (Table-style
variant comparison), ``train`` (one variant on one instance), ``codesign``
(one penalty weight on one instance), ``sweep`` (penalty-weight grid),
``eval`` (score a saved checkpoint). Configuration is flags-first with an
optional ``key=value`` file; explicit flags override the file, the file
overrides defaults. Every artifact embeds the resolved scientific
configuration; output paths and worker counts are deliberately left out of
the headers so reruns stay byte-identical wherever they are written.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .codesign import (
    CodesignError,
    codesign,
    default_lambda_grid,
    sweep_lambda,
)
from .controllers import GcnnParams, init_gcnn, init_grnn
from .harness import (
    VARIANT_ORDER,
    default_sparse_lambda,
    generate_instances,
    run_benchmark,
)
from .lqr import LqrProblem
from .seeding import TAG_EVAL, TAG_SWEEP, TAG_TRAIN, TAG_VALIDATION, float_key, stream
from .serialize import (
    fmt_float,
    read_instance,
    read_params,
    write_csv,
    write_curve_csv,
    write_instance,
    write_params,
    write_topology,
    write_tradeoff_csv,
)
from .training import (
    TrainConfig,
    TrainingDiverged,
    aggregate_curves,
    evaluate_controller,
    make_validation,
    train,
    validate,
)

# Excluded from reproducibility headers: locations and execution details
# that do not influence computed values.
NON_SCIENCE_KEYS = {"out", "config", "instances", "instance", "params", "jobs", "command"}

TRAINABLE = ("grnn", "grnn-dense", "grnn-fixed", "gcnn")


def _float_or_none(text: str):
    text = text.strip().lower()
    if text in ("", "none"):
        return None
    return float(text)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


class Opt:
    def __init__(self, flag, type, default=None, help="", choices=None, required=False):
        self.flag = flag
        self.type = type
        self.default = default
        self.help = help
        self.choices = choices
        self.required = required

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


_OUT = Opt("--out", str, required=True, help="output directory")
_SEED = Opt("--seed", int, 0, help="base seed for all derived streams")
_JOBS = Opt("--jobs", int, 1, help="concurrent worker processes")
_CONFIG = Opt("--config", str, help="key=value file; flags override it")

_TRAIN_OPTS = [
    Opt("--batch-size", int, 20),
    Opt("--total-batches", int, 750),
    Opt("--validation-every", int, 10),
    Opt("--validation-size", int, 100),
    Opt("--weight-decay", float, 1e-4, help="decoupled weight decay (recurrent variants)"),
    Opt("--grad-clip", _float_or_none, None, help="global-norm gradient clip, or none"),
    Opt("--lr-grnn", float, 0.02),
    Opt("--lr-gcnn", float, 0.01),
    Opt("--hidden-dim", int, 5),
    Opt("--nonlinearity", str, "tanh", choices=("tanh", "relu", "identity")),
]

OPTIONS: dict[str, list[Opt]] = {
    "gen": [
        _OUT, _SEED, _CONFIG,
        Opt("--count", int, 10, help="number of instances"),
        Opt("--n", int, 20, help="nodes per instance"),
        Opt("--k-nearest", int, 5),
        Opt("--norm-a", float, 0.995),
        Opt("--norm-b", float, 1.0),
        Opt("--horizon", int, 50),
    ],
    "benchmark": [
        _OUT, _SEED, _JOBS, _CONFIG,
        Opt("--instances", str, required=True, help="directory of instance files"),
        Opt("--variants", _str_list, list(VARIANT_ORDER)),
        Opt("--sparse-lambda", _float_or_none, None, help="penalty for grnn-sparse; default picks by plant norm"),
        Opt("--eval-size", int, 100),
        *_TRAIN_OPTS,
    ],
    "train": [
        _OUT, _SEED, _CONFIG,
        Opt("--instance", str, required=True, help="instance file"),
        Opt("--instance-index", int, 0, help="stream key when the file is part of a set"),
        Opt("--variant", str, "grnn", choices=TRAINABLE),
        Opt("--eval-size", int, 100),
        *_TRAIN_OPTS,
    ],
    "codesign": [
        _OUT, _SEED, _CONFIG,
        Opt("--instance", str, required=True),
        Opt("--instance-index", int, 0),
        Opt("--lam", float, 1.0, help="l1 penalty weight"),
        Opt("--eps", float, 0.004, help="support threshold"),
        *_TRAIN_OPTS,
    ],
    "sweep": [
        _OUT, _SEED, _JOBS, _CONFIG,
        Opt("--instances", str, required=True),
        Opt("--lambdas", _float_list, None, help="comma list; default 13 points in [1e-2, 1e2]"),
        Opt("--eps", float, 0.004),
        *_TRAIN_OPTS,
    ],
    "eval": [
        _OUT, _SEED, _CONFIG,
        Opt("--instance", str, required=True),
        Opt("--instance-index", int, 0),
        Opt("--params", str, required=True, help="checkpoint file"),
        Opt("--eval-size", int, 100),
    ],
}

_HELP = {
    "gen": "sample LQR problem instances onto disk",
    "benchmark": "train and score controller variants across instances",
    "train": "train a single variant on a single instance",
    "codesign": "l1 co-design of one instance at one penalty weight",
    "sweep": "co-design across a penalty-weight grid",
    "eval": "score a saved checkpoint on fresh initial conditions",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grnnctl", description="distributed LQR with graph recurrent controllers")
    subs = parser.add_subparsers(dest="command", required=True)
    for command, opts in OPTIONS.items():
        sub = subs.add_parser(command, help=_HELP[command])
        for opt in opts:
            kwargs = {"default": argparse.SUPPRESS, "help": opt.help}
            if opt.type is not str:
                kwargs["type"] = opt.type
            if opt.choices:
                kwargs["choices"] = opt.choices
            sub.add_argument(opt.flag, **kwargs)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def resolve_config(command: str, explicit: dict) -> dict:
    """Merge defaults, then the config file, then explicit flags."""
    opts = {o.dest: o for o in OPTIONS[command]}
    cfg = {dest: opt.default for dest, opt in opts.items()}
    config_path = explicit.get("config")
    if config_path:
        for key, text in read_config_file(config_path).items():
            if key not in opts:
                raise ValueError(f"unknown config key for {command}: {key!r}")
            if key == "config":
                raise ValueError("config files cannot nest")
            cfg[key] = opts[key].type(text) if opts[key].type is not str else text
    cfg.update(explicit)
    for dest, opt in opts.items():
        if opt.required and cfg.get(dest) is None:
            raise ValueError(f"{opt.flag} is required for {command}")
        if opt.choices and cfg[dest] not in opt.choices:
            raise ValueError(f"{opt.flag} must be one of {opt.choices}, got {cfg[dest]!r}")
    return cfg


def science_header(cfg: dict, **extra) -> dict:
    header = {k: v for k, v in cfg.items() if k not in NON_SCIENCE_KEYS}
    header.update(extra)
    return header


def _outdir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_instances(directory: str) -> list[LqrProblem]:
    paths = sorted(Path(directory).glob("instance_*.json"))
    if not paths:
        raise ValueError(f"no instance_*.json files under {directory}")
    return [read_instance(p) for p in paths]


def _grnn_config(cfg: dict) -> TrainConfig:
    return TrainConfig.for_grnn(
        seed=cfg["seed"],
        batch_size=cfg["batch_size"],
        total_batches=cfg["total_batches"],
        validation_every=cfg["validation_every"],
        validation_size=cfg["validation_size"],
        weight_decay=cfg["weight_decay"],
        grad_clip=cfg["grad_clip"],
        lr=cfg["lr_grnn"],
    )


def _gcnn_config(cfg: dict) -> TrainConfig:
    return TrainConfig.for_gcnn(
        seed=cfg["seed"],
        batch_size=cfg["batch_size"],
        total_batches=cfg["total_batches"],
        validation_every=cfg["validation_every"],
        validation_size=cfg["validation_size"],
        grad_clip=cfg["grad_clip"],
        lr=cfg["lr_gcnn"],
    )


def cmd_gen(cfg: dict) -> int:
    out = _outdir(cfg)
    probs, errors = generate_instances(
        count=cfg["count"], n=cfg["n"], k_nearest=cfg["k_nearest"],
        norm_a=cfg["norm_a"], norm_b=cfg["norm_b"], horizon=cfg["horizon"],
        base_seed=cfg["seed"],
    )
    header = science_header(cfg)
    for i, prob in enumerate(probs):
        write_instance(out / f"instance_{i:03d}.json", prob, header)
    for err in errors:
        print(f"gen: {err}", file=sys.stderr)
    print(f"gen: wrote {len(probs)} instances to {out}")
    return 1 if errors else 0


def cmd_benchmark(cfg: dict) -> int:
    out = _outdir(cfg)
    probs = load_instances(cfg["instances"])
    report = run_benchmark(
        probs,
        cfg["variants"],
        base_seed=cfg["seed"],
        grnn_config=_grnn_config(cfg),
        gcnn_config=_gcnn_config(cfg),
        hidden_dim=cfg["hidden_dim"],
        nonlinearity=cfg["nonlinearity"],
        sparse_lam=cfg["sparse_lambda"],
        eval_size=cfg["eval_size"],
        jobs=cfg["jobs"],
    )
    header = science_header(cfg, instance_count=len(probs))
    rows = []
    for row in report.summary_rows():
        cells = [row["variant"], str(row["instances"]), str(row["failures"])]
        for key in ("cost_q1", "cost_median", "cost_q3"):
            cells.append("" if row[key] is None else fmt_float(row[key]))
        rows.append(tuple(cells))
    write_csv(out / "benchmark.csv", header,
              ("variant", "instances", "failures", "cost_q1", "cost_median", "cost_q3"), rows)
    for variant in report.variants:
        curve = report.aggregated_curve(variant)
        if curve is not None:
            write_curve_csv(out / f"curve_{variant}.csv", curve, science_header(cfg, variant=variant))
    for row in report.summary_rows():
        med = "n/a" if row["cost_median"] is None else f"{row['cost_median']:.4f}"
        print(f"benchmark: {row['variant']}: median normalized cost {med} "
              f"({row['instances']} ok, {row['failures']} failed)")
    return 1 if report.failures else 0


def cmd_train(cfg: dict) -> int:
    out = _outdir(cfg)
    prob = read_instance(cfg["instance"])
    variant = cfg["variant"]
    inst = cfg["instance_index"]
    validation = make_validation(prob, cfg["validation_size"], stream(cfg["seed"], TAG_VALIDATION, inst))
    eval_pack = make_validation(prob, cfg["eval_size"], stream(cfg["seed"], TAG_EVAL, inst))
    rng = stream(cfg["seed"], TAG_TRAIN, inst, VARIANT_ORDER.index(variant))
    if variant == "gcnn":
        params = init_gcnn(prob.sys.source_topology, rng, nonlinearity=cfg["nonlinearity"])
        config = _gcnn_config(cfg)
    else:
        policy = {"grnn": "masked", "grnn-dense": "dense", "grnn-fixed": "fixed"}[variant]
        params = init_grnn(prob.n, cfg["hidden_dim"], rng, mask_policy=policy,
                           topology=prob.sys.source_topology, nonlinearity=cfg["nonlinearity"])
        config = _grnn_config(cfg)
    try:
        params, curve = train(params, prob, config, rng, validation)
    except TrainingDiverged as err:
        print(f"train: {err}", file=sys.stderr)
        return 1
    cost = validate(params, prob, eval_pack)
    header = science_header(cfg)
    write_params(out / f"params_{variant}.json", params, header)
    write_curve_csv(out / f"curve_{variant}.csv", aggregate_curves([curve]), header)
    print(f"train: {variant}: final normalized cost {cost:.4f}")
    return 0


def cmd_codesign(cfg: dict) -> int:
    out = _outdir(cfg)
    prob = read_instance(cfg["instance"])
    inst = cfg["instance_index"]
    lam = cfg["lam"]
    validation = make_validation(prob, cfg["validation_size"], stream(cfg["seed"], TAG_VALIDATION, inst))
    eval_pack = make_validation(prob, cfg["validation_size"], stream(cfg["seed"], TAG_EVAL, inst))
    rng = stream(cfg["seed"], TAG_SWEEP, inst, float_key(lam))
    try:
        result = codesign(
            prob, lam, _grnn_config(cfg), rng,
            validation=validation, eval_pack=eval_pack,
            hidden_dim=cfg["hidden_dim"], nonlinearity=cfg["nonlinearity"], eps=cfg["eps"],
        )
    except CodesignError as err:
        print(f"codesign: {err}", file=sys.stderr)
        return 1
    header = science_header(cfg)
    q1, med, q3 = result.cost_quartiles
    write_csv(out / "codesign.csv", header,
              ("lambda", "edges", "cost_step1", "cost_refined", "cost_q1", "cost_median", "cost_q3", "regressed"),
              [(fmt_float(result.lam), str(result.edge_count), fmt_float(result.cost_step1),
                fmt_float(result.cost_refined), fmt_float(q1), fmt_float(med), fmt_float(q3),
                "true" if result.refinement_regressed else "false")])
    write_topology(out / "topology.dot", result.identified_topology, "dot")
    write_topology(out / "topology.json", result.identified_topology, "json")
    write_params(out / "params_step1.json", result.step1_params, header)
    write_params(out / "params_refined.json", result.refined_params, header)
    write_curve_csv(out / "curve_step1.csv", aggregate_curves([result.step1_curve]), header)
    write_curve_csv(out / "curve_refined.csv", aggregate_curves([result.refined_curve]), header)
    print(f"codesign: lambda={lam:g}: {result.edge_count} edges, "
          f"refined cost {result.cost_refined:.4f}")
    return 0


def cmd_sweep(cfg: dict) -> int:
    out = _outdir(cfg)
    probs = load_instances(cfg["instances"])
    lambdas = cfg["lambdas"] if cfg["lambdas"] else [float(x) for x in default_lambda_grid()]
    lambdas = sorted(lambdas)
    curve = sweep_lambda(
        probs, lambdas, _grnn_config(cfg),
        base_seed=cfg["seed"], jobs=cfg["jobs"],
        hidden_dim=cfg["hidden_dim"], nonlinearity=cfg["nonlinearity"], eps=cfg["eps"],
    )
    header = science_header(cfg, lambdas=lambdas, instance_count=len(probs))
    write_tradeoff_csv(out / "tradeoff.csv", curve, header)
    rows = []
    for cell in curve.cells:
        li = lambdas.index(cell.lam)
        if cell.ok:
            r = cell.result
            rows.append((str(cell.instance), fmt_float(cell.lam), "ok", str(r.edge_count),
                         fmt_float(r.cost_step1), fmt_float(r.cost_refined),
                         "true" if r.refinement_regressed else "false"))
            write_topology(out / f"topology_l{li:02d}_i{cell.instance:03d}.dot",
                           r.identified_topology, "dot")
        else:
            rows.append((str(cell.instance), fmt_float(cell.lam), "failed", "", "", "", ""))
    write_csv(out / "cells.csv", header,
              ("instance", "lambda", "status", "edges", "cost_step1", "cost_refined", "regressed"),
              rows)
    for lam, med_e, med_c in zip(curve.lambdas, curve.edges_median, curve.cost_median):
        print(f"sweep: lambda={lam:g}: median edges {med_e:g}, median cost {med_c:.4f}")
    if curve.failures:
        print(f"sweep: {curve.failures} cells failed", file=sys.stderr)
    return 1 if curve.failures else 0


def cmd_eval(cfg: dict) -> int:
    out = _outdir(cfg)
    prob = read_instance(cfg["instance"])
    params = read_params(cfg["params"])
    pack = make_validation(prob, cfg["eval_size"], stream(cfg["seed"], TAG_EVAL, cfg["instance_index"]))
    cost = validate(params, prob, pack)
    ratios = evaluate_controller(params, prob, pack.x0) / pack.lqr_costs
    q1, med, q3 = np.percentile(ratios, [25.0, 50.0, 75.0])
    arch = "gcnn" if isinstance(params, GcnnParams) else "grnn"
    write_csv(out / "eval.csv", science_header(cfg, arch=arch),
              ("arch", "eval_size", "cost", "cost_q1", "cost_median", "cost_q3"),
              [(arch, str(pack.size), fmt_float(cost), fmt_float(q1), fmt_float(med), fmt_float(q3))])
    print(f"eval: normalized cost {cost:.4f} (median per-sample ratio {med:.4f})")
    return 0


_DISPATCH = {
    "gen": cmd_gen,
    "benchmark": cmd_benchmark,
    "train": cmd_train,
    "codesign": cmd_codesign,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    explicit = vars(ns)
    command = explicit.pop("command")
    try:
        cfg = resolve_config(command, explicit)
    except (ValueError, OSError) as err:
        parser.error(str(err))
    try:
        return _DISPATCH[command](cfg)
    except (ValueError, OSError) as err:
        # bad runtime inputs (unknown variant names, unreadable instance
        # files) get a one-line message instead of a traceback
        print(f"grnnctl {command}: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
