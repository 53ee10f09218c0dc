"""Graph, scenario, and trace file formats.

Graph files are JSON with exactly two top-level keys:

    {"nodes": [{"id": 1, "dim": 1, "C": [[1.0]], "R": [[5.0]], "z": [0.0]}],
     "edges": [{"i": 1, "j": 2, "C_ij": [[1.0]], "C_ji": [[1.0]],
                "R_ij": [[1.0]], "z_ij": [0.0]}]}

C/R/z on a node are optional as a group (a node without a self measurement
omits all three).  Matrices are row-major nested lists.  Unknown keys are
rejected.  Scenario files record the graph content hash, the seed, the drawn
ground truth, and the realized measurements.
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import ArtifactMismatchError, FileFormatError
from .graph import EdgeSpec, MeasurementGraph, NodeSpec, SelfMeasurement
from . import randomness

_NODE_KEYS = {"id", "dim", "C", "R", "z"}
_EDGE_KEYS = {"i", "j", "C_ij", "C_ji", "R_ij", "z_ij"}


def _matrix(obj, what):
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise FileFormatError(f"{what}: not a numeric array")
    return arr


def graph_to_dict(graph: MeasurementGraph) -> dict:
    nodes = []
    for i in graph.node_ids:
        n = graph.node(i)
        rec = {"id": int(n.id), "dim": int(n.dim)}
        if n.self_meas is not None:
            sm = n.self_meas
            rec["C"] = np.asarray(sm.C).tolist()
            rec["R"] = np.asarray(sm.R).tolist()
            rec["z"] = np.asarray(sm.z).tolist()
        nodes.append(rec)
    edges = []
    for e in graph.edges:
        edges.append({"i": int(e.i), "j": int(e.j),
                      "C_ij": np.asarray(e.C_ij).tolist(),
                      "C_ji": np.asarray(e.C_ji).tolist(),
                      "R_ij": np.asarray(e.R).tolist(),
                      "z_ij": np.asarray(e.z).tolist()})
    return {"nodes": nodes, "edges": edges}


def graph_from_dict(data: dict) -> MeasurementGraph:
    if not isinstance(data, dict):
        raise FileFormatError("top level must be an object")
    extra = set(data) - {"nodes", "edges"}
    if extra:
        raise FileFormatError(f"unknown top-level keys: {sorted(extra)}")
    if "nodes" not in data or "edges" not in data:
        raise FileFormatError("missing 'nodes' or 'edges'")
    nodes = []
    for rec in data["nodes"]:
        extra = set(rec) - _NODE_KEYS
        if extra:
            raise FileFormatError(f"node record: unknown keys {sorted(extra)}")
        if "id" not in rec or "dim" not in rec:
            raise FileFormatError("node record: 'id' and 'dim' are required")
        has = [k for k in ("C", "R", "z") if k in rec]
        if has and len(has) != 3:
            raise FileFormatError(
                f"node {rec['id']}: C, R, z must be given together")
        sm = None
        if has:
            sm = SelfMeasurement(_matrix(rec["C"], f"node {rec['id']} C"),
                                 _matrix(rec["R"], f"node {rec['id']} R"),
                                 _matrix(rec["z"], f"node {rec['id']} z"))
        nodes.append(NodeSpec(int(rec["id"]), int(rec["dim"]), sm))
    edges = []
    for rec in data["edges"]:
        extra = set(rec) - _EDGE_KEYS
        if extra:
            raise FileFormatError(f"edge record: unknown keys {sorted(extra)}")
        missing = _EDGE_KEYS - set(rec)
        if missing:
            raise FileFormatError(f"edge record: missing keys {sorted(missing)}")
        name = f"edge ({rec['i']},{rec['j']})"
        edges.append(EdgeSpec(int(rec["i"]), int(rec["j"]),
                              _matrix(rec["C_ij"], name),
                              _matrix(rec["C_ji"], name),
                              _matrix(rec["R_ij"], name),
                              _matrix(rec["z_ij"], name)))
    return MeasurementGraph(nodes, edges)


def _canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def graph_hash(graph: MeasurementGraph) -> str:
    return hashlib.sha256(
        _canonical_json(graph_to_dict(graph)).encode()).hexdigest()


def save_graph(graph: MeasurementGraph, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_graph(path) -> MeasurementGraph:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: line {exc.lineno}: {exc.msg}")
    return graph_from_dict(data)


def make_scenario(graph: MeasurementGraph, seed: int,
                  noise_free: bool = False) -> dict:
    x_true = randomness.draw_x_true(graph, seed)
    z_self, z_edge = randomness.realize_measurements(graph, x_true, seed,
                                                     noise_free)
    return {
        "graph_sha256": graph_hash(graph),
        "seed": int(seed),
        "noise_free": bool(noise_free),
        "x_true": {str(i): v.tolist() for i, v in x_true.items()},
        "z_self": {str(i): v.tolist() for i, v in z_self.items()},
        "z_edges": [{"i": int(i), "j": int(j), "z": z.tolist()}
                    for (i, j), z in sorted(z_edge.items())],
    }


def save_scenario(scenario: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: line {exc.lineno}: {exc.msg}")
    required = {"graph_sha256", "seed", "x_true", "z_self", "z_edges"}
    missing = required - set(data)
    if missing:
        raise FileFormatError(f"scenario missing keys {sorted(missing)}")
    return data


def apply_scenario(graph: MeasurementGraph, scenario: dict) -> MeasurementGraph:
    """Graph with the scenario's realized measurements; hashes must match."""
    h = graph_hash(graph)
    if scenario["graph_sha256"] != h:
        raise ArtifactMismatchError(
            f"scenario was generated for graph {scenario['graph_sha256'][:12]}, "
            f"got {h[:12]}")
    z_self = {int(i): np.array(v, float) for i, v in scenario["z_self"].items()}
    z_edge = {(rec["i"], rec["j"]): np.array(rec["z"], float)
              for rec in scenario["z_edges"]}
    return randomness.with_measurements(graph, z_self, z_edge)


def write_trace_csv(path, trace, graph: MeasurementGraph,
                    reason: str, meta: dict | None = None):
    """One row per (iteration, node): estimate norm, information trace, and
    the flattened estimate.  Hash/metadata lines are '#'-prefixed."""
    max_dim = max(graph.node(i).dim for i in graph.node_ids)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in sorted((meta or {}).items()):
            fh.write(f"# {key}={value}\n")
        fh.write(f"# termination={reason}\n")
        cols = ["k", "node", "x_norm", "q_trace"]
        cols += [f"x_{t}" for t in range(max_dim)]
        fh.write(",".join(cols) + "\n")
        for beliefs in trace:
            for i in graph.node_ids:
                if i in beliefs.x_hat:
                    x = beliefs.x_hat[i]
                    norm = repr(float(np.linalg.norm(x)))
                    xs = [repr(float(v)) for v in x]
                else:
                    norm = "nan"
                    xs = []
                xs += [""] * (max_dim - len(xs))
                qt = repr(float(np.trace(beliefs.Q[i])))
                fh.write(f"{beliefs.iteration},{i},{norm},{qt}," + ",".join(xs) + "\n")
