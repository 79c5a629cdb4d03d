"""Experiment orchestration: instance generation, benchmark grids, sweeps.

A benchmark run is a grid of (variant, instance) cells. Every cell derives
its own RNG stream from the base seed, the instance index, and the
variant's fixed position in :data:`VARIANT_ORDER`, so a cell reruns
identically no matter which subset of the grid is requested or how many
workers execute it. All variants of one instance share the same validation
pack (for comparable learning curves) and the same held-out evaluation pack
(for paired cost ratios).
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codesign import CodesignError, CodesignResult, codesign
from .controllers import init_gcnn, init_grnn
from .dynamics import DivergedError, generate_system
from .graphs import sample_topology
from .linalg import ConvergenceError
from .lqr import LqrProblem, centralized_gain, evaluate_linear, make_problem, normalized_cost
from .seeding import TAG_EVAL, TAG_SYSTEM, TAG_TOPOLOGY, TAG_TRAIN, TAG_VALIDATION, stream
from .training import (
    AggregateCurve,
    LearningCurve,
    TrainConfig,
    TrainingDiverged,
    aggregate_curves,
    make_validation,
    train,
    validate,
)

VARIANT_ORDER = ("autonomous", "lqr", "grnn", "grnn-dense", "grnn-sparse", "grnn-fixed", "gcnn")
GRNN_POLICIES = {"grnn": "masked", "grnn-dense": "dense", "grnn-fixed": "fixed"}


def default_sparse_lambda(norm_a: float) -> float:
    """Benchmark penalty weight: 1 for contractive plants, 2 for expansive."""
    return 1.0 if norm_a <= 1.0 else 2.0


def generate_instances(
    count: int,
    n: int = 20,
    k_nearest: int = 5,
    norm_a: float = 0.995,
    norm_b: float = 1.0,
    horizon: int = 50,
    base_seed: int = 0,
):
    """Sample ``count`` problem instances; returns (problems, error strings).

    Instance ``i`` draws its topology and system from streams keyed on
    ``i``, so any single instance regenerates without the others. A Riccati
    failure skips that instance and is reported, not raised.
    """
    probs: list[LqrProblem] = []
    errors: list[str] = []
    for i in range(count):
        topo = sample_topology(n, k_nearest, stream(base_seed, TAG_TOPOLOGY, i))
        sys = generate_system(topo, norm_a, norm_b, stream(base_seed, TAG_SYSTEM, i), seed=base_seed)
        try:
            probs.append(make_problem(sys, horizon=horizon))
        except (ConvergenceError, np.linalg.LinAlgError) as err:
            errors.append(f"instance {i}: {err}")
    return probs, errors


@dataclass(eq=False)
class CellOutcome:
    variant: str
    instance: int
    cost: float | None = None
    curve: LearningCurve | None = None
    params: object | None = None
    codesign_result: CodesignResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(eq=False)
class BenchmarkReport:
    variants: list[str]
    cells: list[CellOutcome]

    def outcomes(self, variant: str) -> list[CellOutcome]:
        return [c for c in self.cells if c.variant == variant]

    @property
    def failures(self) -> int:
        return sum(not c.ok for c in self.cells)

    def costs(self, variant: str) -> np.ndarray:
        return np.array([c.cost for c in self.outcomes(variant) if c.ok], dtype=np.float64)

    def summary_rows(self) -> list[dict]:
        rows = []
        for variant in self.variants:
            outs = self.outcomes(variant)
            costs = self.costs(variant)
            row = {"variant": variant, "instances": len(costs), "failures": sum(not c.ok for c in outs)}
            if costs.size:
                q1, med, q3 = np.percentile(costs, [25.0, 50.0, 75.0])
                row.update(cost_q1=float(q1), cost_median=float(med), cost_q3=float(q3))
            else:
                row.update(cost_q1=None, cost_median=None, cost_q3=None)
            rows.append(row)
        return rows

    def aggregated_curve(self, variant: str) -> AggregateCurve | None:
        curves = [c.curve for c in self.outcomes(variant) if c.ok and c.curve is not None]
        if not curves:
            return None
        return aggregate_curves(curves)


def _run_benchmark_cell(args) -> CellOutcome:
    (prob, variant, inst, base_seed, grnn_config, gcnn_config,
     hidden_dim, nonlinearity, sparse_lam, eval_size) = args
    validation = make_validation(prob, grnn_config.validation_size, stream(base_seed, TAG_VALIDATION, inst))
    eval_pack = make_validation(prob, eval_size, stream(base_seed, TAG_EVAL, inst))
    sys = prob.sys
    out = CellOutcome(variant=variant, instance=inst)
    try:
        if variant == "autonomous":
            costs = evaluate_linear(sys, prob, None, eval_pack.x0)
            out.cost = normalized_cost(costs, eval_pack.lqr_costs)
        elif variant == "lqr":
            gain = centralized_gain(sys.a, sys.b, prob.p_mat, prob.r_mat)
            costs = evaluate_linear(sys, prob, gain, eval_pack.x0)
            out.cost = normalized_cost(costs, eval_pack.lqr_costs)
        else:
            rng = stream(base_seed, TAG_TRAIN, inst, VARIANT_ORDER.index(variant))
            if variant in GRNN_POLICIES:
                params = init_grnn(
                    prob.n, hidden_dim, rng,
                    mask_policy=GRNN_POLICIES[variant],
                    topology=sys.source_topology,
                    nonlinearity=nonlinearity,
                )
                params, curve = train(params, prob, grnn_config, rng, validation)
                out.params, out.curve = params, curve
                out.cost = validate(params, prob, eval_pack)
            elif variant == "gcnn":
                params = init_gcnn(sys.source_topology, rng, nonlinearity=nonlinearity)
                params, curve = train(params, prob, gcnn_config, rng, validation)
                out.params, out.curve = params, curve
                out.cost = validate(params, prob, eval_pack)
            elif variant == "grnn-sparse":
                lam = default_sparse_lambda(sys.norm_a) if sparse_lam is None else sparse_lam
                result = codesign(
                    prob, lam, grnn_config, rng,
                    validation=validation, eval_pack=eval_pack,
                    hidden_dim=hidden_dim, nonlinearity=nonlinearity,
                )
                out.codesign_result = result
                out.params = result.refined_params
                out.curve = result.refined_curve
                out.cost = result.cost_refined
            else:
                raise ValueError(f"unknown variant: {variant!r}")
    except (TrainingDiverged, CodesignError, DivergedError, ConvergenceError) as err:
        out.error = f"{type(err).__name__}: {err}"
    return out


def run_benchmark(
    probs,
    variants,
    base_seed: int = 0,
    grnn_config: TrainConfig | None = None,
    gcnn_config: TrainConfig | None = None,
    hidden_dim: int = 5,
    nonlinearity: str = "tanh",
    sparse_lam: float | None = None,
    eval_size: int = 100,
    jobs: int = 1,
) -> BenchmarkReport:
    """Train and evaluate every requested variant on every instance."""
    probs = list(probs)
    requested = set(variants)
    unknown = requested - set(VARIANT_ORDER)
    if unknown:
        raise ValueError(f"unknown variants: {sorted(unknown)}")
    variants = [v for v in VARIANT_ORDER if v in requested]
    if grnn_config is None:
        grnn_config = TrainConfig.for_grnn(seed=base_seed)
    if gcnn_config is None:
        gcnn_config = TrainConfig.for_gcnn(seed=base_seed)
    work = [
        (prob, variant, inst, base_seed, grnn_config, gcnn_config,
         hidden_dim, nonlinearity, sparse_lam, eval_size)
        for variant in variants
        for inst, prob in enumerate(probs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_benchmark_cell, work))
    else:
        cells = [_run_benchmark_cell(w) for w in work]
    return BenchmarkReport(variants=variants, cells=cells)
