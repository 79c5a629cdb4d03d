"""Controller/topology co-design.

Step 1 trains a dense-S GRNN with an l1 penalty on S, realized as a
proximal soft-threshold after each ADAM update so masked-out entries land
on exact zeros. Step 2 reads the communication topology off the support of
the trained S. Step 3 retrains with S restricted to that support and the
penalty removed. Sweeping the penalty weight traces the cost-versus-edges
tradeoff curve.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .controllers import GrnnParams, init_grnn
from .graphs import Topology, support_mask
from .linalg import soft_threshold
from .lqr import LqrProblem
from .seeding import TAG_EVAL, TAG_SWEEP, TAG_VALIDATION, float_key, stream
from .training import (
    LearningCurve,
    TrainConfig,
    TrainingDiverged,
    ValidationPack,
    evaluate_controller,
    make_validation,
    train,
    validate,
)

DEFAULT_SUPPORT_EPS = 0.004

STAGE_SPARSE = "sparse-training"
STAGE_REFINE = "refinement"


class CodesignError(RuntimeError):
    """A co-design stage aborted; carries which stage and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage


def prox_l1(s: np.ndarray, tau: float) -> np.ndarray:
    """Proximal operator of tau * entrywise l1: elementwise soft-threshold."""
    if tau < 0.0:
        raise ValueError("threshold must be nonnegative")
    return soft_threshold(np.asarray(s, dtype=np.float64), tau)


def threshold_support(s: np.ndarray, eps: float = DEFAULT_SUPPORT_EPS) -> Topology:
    """Read a topology off S: edge (j -> i) wherever |s_ij| >= eps.

    Surviving diagonal entries are recorded as self-loops; the refinement
    mask admits the diagonal regardless (self-loops cost no communication).
    """
    if eps <= 0.0:
        raise ValueError("support threshold must be positive")
    s = np.asarray(s, dtype=np.float64)
    return Topology(adjacency=np.abs(s) >= eps)


@dataclass(eq=False)
class CodesignResult:
    lam: float
    identified_topology: Topology
    edge_count: int
    step1_params: GrnnParams
    refined_params: GrnnParams
    cost_step1: float
    cost_refined: float
    cost_quartiles: tuple[float, float, float]
    refinement_regressed: bool
    step1_curve: LearningCurve
    refined_curve: LearningCurve


def codesign(
    prob: LqrProblem,
    lam: float,
    config: TrainConfig,
    rng: np.random.Generator,
    validation: ValidationPack | None = None,
    eval_pack: ValidationPack | None = None,
    hidden_dim: int = 5,
    nonlinearity: str = "tanh",
    eps: float = DEFAULT_SUPPORT_EPS,
) -> CodesignResult:
    """Two-step co-design on one problem instance.

    Evaluation costs are normalized on ``eval_pack`` (held out from
    training); the refinement-regression flag compares the two stages on
    the shared ``validation`` pack they were both scored against during
    training. The step-1 controller is reported after thresholding, i.e.
    exactly the parameters refinement warm-starts from.
    """
    if lam < 0.0:
        raise ValueError("penalty weight must be nonnegative")
    if validation is None:
        validation = make_validation(prob, config.validation_size, rng)
    if eval_pack is None:
        eval_pack = make_validation(prob, config.validation_size, rng)

    dense = init_grnn(prob.n, hidden_dim, rng, mask_policy="dense", nonlinearity=nonlinearity)
    try:
        dense, step1_curve = train(dense, prob, config.replace(l1_weight=lam), rng, validation)
    except TrainingDiverged as err:
        raise CodesignError(STAGE_SPARSE, err) from err

    topo = threshold_support(dense.s, eps)
    mask = support_mask(topo)
    step1 = GrnnParams(
        s=np.where(mask, dense.s, 0.0),
        f=dense.f.copy(),
        w=dense.w.copy(),
        g=dense.g.copy(),
        mask=mask,
        s_trainable=True,
        nonlinearity=nonlinearity,
    )

    refined = GrnnParams(
        s=step1.s.copy(),
        f=step1.f.copy(),
        w=step1.w.copy(),
        g=step1.g.copy(),
        mask=mask.copy(),
        s_trainable=True,
        nonlinearity=nonlinearity,
    )
    try:
        refined, refined_curve = train(refined, prob, config.replace(l1_weight=0.0), rng, validation)
    except TrainingDiverged as err:
        raise CodesignError(STAGE_REFINE, err) from err

    off_diag = ~np.eye(prob.n, dtype=bool)
    edge_count = int(np.count_nonzero(refined.s * off_diag))
    cost_step1 = validate(step1, prob, eval_pack)
    cost_refined = validate(refined, prob, eval_pack)
    ratios = evaluate_controller(refined, prob, eval_pack.x0) / eval_pack.lqr_costs
    q1, med, q3 = np.percentile(ratios, [25.0, 50.0, 75.0])
    regressed = validate(refined, prob, validation) > validate(step1, prob, validation)
    return CodesignResult(
        lam=float(lam),
        identified_topology=topo,
        edge_count=edge_count,
        step1_params=step1,
        refined_params=refined,
        cost_step1=cost_step1,
        cost_refined=cost_refined,
        cost_quartiles=(float(q1), float(med), float(q3)),
        refinement_regressed=bool(regressed),
        step1_curve=step1_curve,
        refined_curve=refined_curve,
    )


def default_lambda_grid() -> np.ndarray:
    """13 log-spaced penalty weights covering 1e-2 through 1e2."""
    return np.logspace(-2.0, 2.0, 13)


@dataclass(eq=False)
class SweepCell:
    instance: int
    lam: float
    result: CodesignResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


@dataclass(eq=False)
class TradeoffCurve:
    """Per-penalty-weight quartiles of edge count and normalized cost."""

    lambdas: np.ndarray
    edges_q1: np.ndarray
    edges_median: np.ndarray
    edges_q3: np.ndarray
    cost_q1: np.ndarray
    cost_median: np.ndarray
    cost_q3: np.ndarray
    cells: list[SweepCell] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(not c.ok for c in self.cells)


def _run_cell(args) -> SweepCell:
    prob, inst, lam, config, base_seed, hidden_dim, nonlinearity, eps = args
    validation = make_validation(prob, config.validation_size, stream(base_seed, TAG_VALIDATION, inst))
    eval_pack = make_validation(prob, config.validation_size, stream(base_seed, TAG_EVAL, inst))
    rng = stream(base_seed, TAG_SWEEP, inst, float_key(lam))
    try:
        result = codesign(
            prob, lam, config, rng,
            validation=validation, eval_pack=eval_pack,
            hidden_dim=hidden_dim, nonlinearity=nonlinearity, eps=eps,
        )
    except CodesignError as err:
        return SweepCell(instance=inst, lam=float(lam), error=str(err))
    return SweepCell(instance=inst, lam=float(lam), result=result)


def sweep_lambda(
    probs,
    lambdas,
    config: TrainConfig,
    base_seed: int | None = None,
    jobs: int = 1,
    hidden_dim: int = 5,
    nonlinearity: str = "tanh",
    eps: float = DEFAULT_SUPPORT_EPS,
) -> TradeoffCurve:
    """Co-design every (instance, penalty weight) cell and aggregate.

    Each cell gets its own deterministic stream keyed on the instance index
    and the bit pattern of the penalty weight, so any cell reruns
    identically in isolation and duplicate weights produce identical cells.
    Failed cells are recorded and skipped by the aggregation.
    """
    probs = list(probs)
    lambdas = sorted(float(l) for l in lambdas)
    if not probs:
        raise ValueError("need at least one problem instance")
    if len(lambdas) < 2:
        raise ValueError("need at least two penalty weights")
    if base_seed is None:
        base_seed = config.seed
    work = [
        (prob, inst, lam, config, base_seed, hidden_dim, nonlinearity, eps)
        for lam in lambdas
        for inst, prob in enumerate(probs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, work))
    else:
        cells = [_run_cell(w) for w in work]

    kept_lams, e_q1, e_med, e_q3, c_q1, c_med, c_q3 = [], [], [], [], [], [], []
    for j, lam in enumerate(lambdas):
        row = [c.result for c in cells[j * len(probs):(j + 1) * len(probs)] if c.ok]
        if not row:
            continue
        edges = np.array([r.edge_count for r in row], dtype=np.float64)
        costs = np.array([r.cost_refined for r in row], dtype=np.float64)
        kept_lams.append(lam)
        eq = np.percentile(edges, [25.0, 50.0, 75.0])
        cq = np.percentile(costs, [25.0, 50.0, 75.0])
        e_q1.append(eq[0]); e_med.append(eq[1]); e_q3.append(eq[2])
        c_q1.append(cq[0]); c_med.append(cq[1]); c_q3.append(cq[2])
    return TradeoffCurve(
        lambdas=np.asarray(kept_lams),
        edges_q1=np.asarray(e_q1),
        edges_median=np.asarray(e_med),
        edges_q3=np.asarray(e_q3),
        cost_q1=np.asarray(c_q1),
        cost_median=np.asarray(c_med),
        cost_q3=np.asarray(c_q3),
        cells=cells,
    )
