"""Artifact persistence with byte-stable output.

Every writer goes through :func:`atomic_write` (temp file plus rename), keys
are sorted, and floats are formatted with ``repr`` so a value round-trips
exactly and a rerun with the same seed reproduces the same bytes. CSV files
carry the resolved run configuration as leading ``#`` comment lines.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .codesign import TradeoffCurve
from .controllers import GcnnParams, GrnnParams
from .dynamics import LinearSystem
from .graphs import export_topology, topology_from_json
from .lqr import LqrProblem
from .training import AggregateCurve


def fmt_float(x) -> str:
    """Shortest exact decimal form of a float (repr round-trips)."""
    return repr(float(x))


def _header_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "none"
    if isinstance(v, (list, tuple, np.ndarray)):
        return json.dumps([_header_value(x) for x in v])
    return str(v)


def header_lines(header: dict) -> list[str]:
    return [f"# {k} = {_header_value(v)}" for k, v in sorted(header.items())]


def atomic_write(path, text: str) -> None:
    """Write text then rename into place, so readers never see partial files."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_csv(path, header: dict, columns, rows) -> None:
    lines = header_lines(header)
    lines.append(",".join(columns))
    lines.extend(",".join(row) for row in rows)
    atomic_write(path, "\n".join(lines) + "\n")


def write_curve_csv(path, curve: AggregateCurve, header: dict) -> None:
    rows = [
        (str(int(b)), fmt_float(q1), fmt_float(med), fmt_float(q3))
        for b, q1, med, q3 in zip(curve.batches, curve.q1, curve.median, curve.q3)
    ]
    write_csv(path, header, ("batch", "cost_q1", "cost_median", "cost_q3"), rows)


def write_tradeoff_csv(path, curve: TradeoffCurve, header: dict) -> None:
    rows = [
        tuple(fmt_float(v) for v in row)
        for row in zip(
            curve.lambdas,
            curve.edges_q1, curve.edges_median, curve.edges_q3,
            curve.cost_q1, curve.cost_median, curve.cost_q3,
        )
    ]
    columns = ("lambda", "edges_q1", "edges_median", "edges_q3", "cost_q1", "cost_median", "cost_q3")
    write_csv(path, header, columns, rows)


def system_to_dict(prob: LqrProblem) -> dict:
    sys = prob.sys
    return {
        "topology": json.loads(export_topology(sys.source_topology, "json")),
        "a": sys.a.tolist(),
        "b": sys.b.tolist(),
        "q": prob.q_mat.tolist(),
        "r": prob.r_mat.tolist(),
        "p": prob.p_mat.tolist(),
        "norm_a": float(sys.norm_a),
        "norm_b": float(sys.norm_b),
        "horizon": int(prob.horizon),
        "seed": None if sys.seed is None else int(sys.seed),
    }


def write_instance(path, prob: LqrProblem, header: dict) -> None:
    payload = {"config": {k: _header_value(v) for k, v in header.items()}, **system_to_dict(prob)}
    atomic_write(path, json.dumps(payload, sort_keys=True) + "\n")


def read_instance(path) -> LqrProblem:
    with open(path) as fh:
        obj = json.load(fh)
    topo = topology_from_json(json.dumps(obj["topology"]))
    sys = LinearSystem(
        a=np.asarray(obj["a"], dtype=np.float64),
        b=np.asarray(obj["b"], dtype=np.float64),
        source_topology=topo,
        norm_a=float(obj["norm_a"]),
        norm_b=float(obj["norm_b"]),
        seed=None if obj.get("seed") is None else int(obj["seed"]),
    )
    return LqrProblem(
        sys=sys,
        q_mat=np.asarray(obj["q"], dtype=np.float64),
        r_mat=np.asarray(obj["r"], dtype=np.float64),
        p_mat=np.asarray(obj["p"], dtype=np.float64),
        horizon=int(obj["horizon"]),
    )


def params_to_dict(params) -> dict:
    if isinstance(params, GrnnParams):
        return {
            "arch": "grnn",
            "nonlinearity": params.nonlinearity,
            "shapes": {
                "s": list(params.s.shape),
                "f": list(params.f.shape),
                "w": list(params.w.shape),
                "g": list(params.g.shape),
            },
            "s": params.s.tolist(),
            "f": params.f.tolist(),
            "w": params.w.tolist(),
            "g": params.g.tolist(),
            "mask": None if params.mask is None else params.mask.tolist(),
            "s_trainable": bool(params.s_trainable),
        }
    if isinstance(params, GcnnParams):
        return {
            "arch": "gcnn",
            "nonlinearity": params.nonlinearity,
            "shapes": {"s": list(params.s.shape), "layers": [[list(h.shape) for h in taps] for taps in params.layers]},
            "s": params.s.tolist(),
            "layers": [[h.tolist() for h in taps] for taps in params.layers],
        }
    raise TypeError(f"unsupported parameter type: {type(params).__name__}")


def write_params(path, params, header: dict) -> None:
    payload = {"config": {k: _header_value(v) for k, v in header.items()}, **params_to_dict(params)}
    atomic_write(path, json.dumps(payload, sort_keys=True) + "\n")


def read_params(path):
    with open(path) as fh:
        obj = json.load(fh)
    arch = obj.get("arch")
    if arch == "grnn":
        mask = obj.get("mask")
        return GrnnParams(
            s=np.asarray(obj["s"], dtype=np.float64),
            f=np.asarray(obj["f"], dtype=np.float64),
            w=np.asarray(obj["w"], dtype=np.float64),
            g=np.asarray(obj["g"], dtype=np.float64),
            mask=None if mask is None else np.asarray(mask, dtype=bool),
            s_trainable=bool(obj.get("s_trainable", True)),
            nonlinearity=obj["nonlinearity"],
        )
    if arch == "gcnn":
        return GcnnParams(
            s=np.asarray(obj["s"], dtype=np.float64),
            layers=[[np.asarray(h, dtype=np.float64) for h in taps] for taps in obj["layers"]],
            nonlinearity=obj["nonlinearity"],
        )
    raise ValueError(f"unknown architecture in checkpoint: {arch!r}")


def write_topology(path, topology, fmt: str = "dot") -> None:
    atomic_write(path, export_topology(topology, fmt))
