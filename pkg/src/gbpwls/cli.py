"""Command line surface: validate, generate, run, analyze, report.

Exit codes: 0 success, 1 validation failure (bad graph, bad file, mismatched
artifacts, dominance condition violated), 2 runtime error.
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import accuracy, convergence, fileio, messages, oracle
from .errors import (ArtifactMismatchError, FileFormatError, GbpwlsError,
                     GraphValidationError)
from .graph import check_dominance, cycle_free_depth, diameter

VALIDATION_ERRORS = (GraphValidationError, FileFormatError, ArtifactMismatchError)


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(1 if isinstance(exc, VALIDATION_ERRORS) else 2)


def _load_graph(path):
    graph = fileio.load_graph(path)
    violations = graph.validate()
    if violations:
        raise GraphValidationError(violations)
    return graph


def _scenario_hash(scenario: dict) -> str:
    blob = json.dumps(scenario, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@click.group()
def main():
    """Distributed Gaussian state estimation tools."""


@main.command()
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
def validate(graph_path):
    """Check a graph file for structural and model violations."""
    try:
        graph = fileio.load_graph(graph_path)
    except FileFormatError as exc:
        _fail(exc)
    violations = graph.validate()
    if violations:
        for v in violations:
            click.echo(str(v))
        sys.exit(1)
    try:
        dom = check_dominance(graph)
    except GbpwlsError as exc:
        _fail(exc)
    click.echo(f"valid; eta={dom.eta!r}")
    if not dom.holds:
        click.echo(
            f"edge-information dominance violated (eta={dom.eta:.6g} >= 1)")
        sys.exit(1)


@main.command()
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, required=True)
@click.option("--noise-free", is_flag=True, default=False)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def generate(graph_path, seed, noise_free, out_path):
    """Draw a seeded ground truth and measurement set for a graph."""
    try:
        graph = _load_graph(graph_path)
        scenario = fileio.make_scenario(graph, seed, noise_free)
        fileio.save_scenario(scenario, out_path)
    except GbpwlsError as exc:
        _fail(exc)
    click.echo(f"scenario written to {out_path}")


def _wide_trace(fh, graph, trace, stability, meta):
    node_ids = graph.node_ids
    center = node_ids[0]
    for key, value in sorted(meta.items()):
        fh.write(f"# {key}={value}\n")
    cols = ["k", "x_norm_center", "q_trace_center"]
    for i in node_ids:
        cols += [f"x_norm_{i}", f"q_trace_{i}"]
    cols += ["q_envelope", "x_envelope"]
    fh.write(",".join(cols) + "\n")
    if not trace:
        fh.write("no iterations\n")
        return
    alpha = rho = rho_bar = None
    if stability is not None:
        alpha, rho = stability.alpha, stability.rho
        if stability.distributed_verdict == "pass":
            rho_bar = stability.rho_bar
    for beliefs in trace:
        k = beliefs.iteration
        row = [str(k)]
        for i in (center,) + node_ids:
            if i in beliefs.x_hat:
                row.append(repr(float(np.linalg.norm(beliefs.x_hat[i]))))
            else:
                row.append("nan")
            row.append(repr(float(np.trace(beliefs.Q[i]))))
        row.append(repr(alpha * rho ** (k - 1)) if alpha is not None else "")
        row.append(repr(rho_bar ** k) if rho_bar is not None else "")
        fh.write(",".join(row) + "\n")


@main.command()
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-iters", type=click.IntRange(min=1), default=None)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def run(graph_path, scenario_path, tol, max_iters, out_path):
    """Run the message engine on a scenario and write the iteration trace."""
    try:
        base = _load_graph(graph_path)
        scenario = fileio.load_scenario(scenario_path)
        graph = fileio.apply_scenario(base, scenario)
        if max_iters is None:
            max_iters = convergence.default_max_iters(graph)
        try:
            stability = convergence.analyze_stability(graph)
        except GbpwlsError:
            stability = None
        trace, reason = messages.run(graph, max_iters, tol)
        meta = {
            "graph_sha256": fileio.graph_hash(base),
            "scenario_sha256": _scenario_hash(scenario),
            "termination": reason,
        }
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            _wide_trace(fh, graph, trace, stability, meta)
    except GbpwlsError as exc:
        _fail(exc)
    click.echo(f"termination: {reason}")
    click.echo(f"trace written to {out_path}")


def _fmt(value):
    if value is None:
        return "unavailable"
    if isinstance(value, float) and math.isnan(value):
        return "unavailable"
    return repr(value) if isinstance(value, float) else str(value)


def _stability_lines(graph, st):
    lines = [
        f"eta={_fmt(st.eta if st else None)}",
        f"rho={_fmt(st.rho if st else None)}",
        f"alpha={_fmt(st.alpha if st else None)}",
        f"spectral_radius={_fmt(st.spectral_radius if st else None)}",
        f"stable={_fmt(st.stable if st else None)}",
        f"marginal={_fmt(st.marginal if st else None)}",
        f"rho_bar={_fmt(st.rho_bar if st else None)}",
        f"distributed_condition={_fmt(st.distributed_verdict if st else None)}",
        f"beta={_fmt(st.beta if st else None)}",
    ]
    if st is not None and st.per_node_sigma:
        for i, s in sorted(st.per_node_sigma.items()):
            lines.append(f"sigma_{i}={s!r}")
    return lines


@main.command()
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", "scenario_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-iters", type=click.IntRange(min=1), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def analyze(graph_path, scenario_path, tol, max_iters, out_dir):
    """Stability and per-node accuracy reports for a graph."""
    try:
        base = _load_graph(graph_path)
        graph = base
        if scenario_path is not None:
            graph = fileio.apply_scenario(base,
                                          fileio.load_scenario(scenario_path))
    except GbpwlsError as exc:
        _fail(exc)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stability = None
    stability_error = None
    try:
        stability = convergence.analyze_stability(graph)
    except GbpwlsError as exc:
        stability_error = str(exc)

    lines = [f"graph_sha256={fileio.graph_hash(base)}",
             f"acyclic={graph.n_edges == graph.n_nodes - 1}"]
    lines += _stability_lines(graph, stability)
    if stability_error:
        lines.append(f"stability_error={stability_error}")
    (out / "stability.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    header = ["node", "d", "alpha_tilde", "rho_tilde", "eta", "kappa",
              "q_bound_at_d", "q_gap_at_d", "q_lower_ok", "q_upper_ok",
              "x_bound", "x_weighted_error", "x_ok", "exact", "notes"]
    rows = []
    ml = None
    try:
        ml = oracle.solve_ml(graph)
    except GbpwlsError as exc:
        rows.append(["all", "", "", "", "", "", "", "", "", "", "", "",
                     "", "", f"oracle unavailable: {exc}"])
    if ml is not None and stability is not None:
        if max_iters is None:
            max_iters = convergence.default_max_iters(graph)
        need = max(cycle_free_depth(graph, i) for i in graph.node_ids)
        if need == math.inf:
            need = diameter(graph)
        trace, _ = messages.run(graph, max(max_iters, int(need) + 2), tol)
        for i in graph.node_ids:
            try:
                rep = accuracy.node_accuracy(graph, i, ml, stability, trace)
            except GbpwlsError as exc:
                rows.append([str(i)] + [""] * 13 + [f"unavailable: {exc}"])
                continue
            q, x = rep.q_record, rep.x_record
            rows.append([
                str(i), _fmt(float(rep.d) if rep.d != math.inf else None),
                _fmt(rep.alpha_tilde), _fmt(rep.rho_tilde), _fmt(rep.eta),
                _fmt(rep.kappa),
                _fmt(q.bound_at_d) if q else "", _fmt(q.gap_at_d) if q else "",
                str(q.lower_ok) if q else "", str(q.upper_ok) if q else "",
                _fmt(x.bound) if x else "", _fmt(x.weighted_error) if x else "",
                str(x.ok) if x else "", str(rep.exact),
                "; ".join(rep.notes),
            ])
    elif ml is not None:
        rows.append(["all", "", "", "", "", "", "", "", "", "", "", "", "",
                     "", f"stability unavailable: {stability_error}"])
    with open(out / "accuracy.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    click.echo(f"reports written to {out_dir}")


def _read_trace_meta(path):
    meta = {}
    rows = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif line and not line.startswith("k,"):
                rows += 1
    return meta, rows


@main.command()
@click.option("--graph", "graph_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--trace", "trace_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def report(graph_path, scenario_path, trace_path, out_dir):
    """Join oracle values, an engine trace, and bound computations."""
    try:
        base = _load_graph(graph_path)
        scenario = fileio.load_scenario(scenario_path)
        meta, data_rows = _read_trace_meta(trace_path)
        if meta.get("graph_sha256") != fileio.graph_hash(base):
            raise ArtifactMismatchError("trace was produced from a different graph")
        if meta.get("scenario_sha256") != _scenario_hash(scenario):
            raise ArtifactMismatchError("trace was produced from a different scenario")
        graph = fileio.apply_scenario(base, scenario)
    except GbpwlsError as exc:
        _fail(exc)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = [f"graph_sha256={meta['graph_sha256']}",
               f"scenario_sha256={meta['scenario_sha256']}",
               f"termination={meta.get('termination', 'unknown')}",
               f"trace_rows={data_rows}"]
    header = ["node", "x_ml_norm", "x_final_norm", "x_error_norm",
              "q_gap_at_d", "q_bound_at_d", "q_ok",
              "x_weighted_error", "x_bound", "x_ok"]
    lines = [",".join(header)]
    if data_rows == 0:
        lines.append("no iterations")
        summary.append("no iterations recorded")
    else:
        try:
            ml = oracle.solve_ml(graph)
            stability = convergence.analyze_stability(graph)
            need = max(cycle_free_depth(graph, i) for i in graph.node_ids)
            if need == math.inf:
                need = diameter(graph)
            max_iters = max(convergence.default_max_iters(graph), int(need) + 2)
            trace, _ = messages.run(graph, max_iters, 1e-10)
            all_ok = True
            for i in graph.node_ids:
                rep = accuracy.node_accuracy(graph, i, ml, stability, trace)
                x_final = trace[-1].x_hat.get(i)
                err = (float(np.linalg.norm(x_final - ml.x_hat[i]))
                       if x_final is not None else float("nan"))
                q, x = rep.q_record, rep.x_record
                q_ok = q.lower_ok and q.upper_ok if q else rep.exact
                x_ok = x.ok if x else rep.exact
                all_ok = all_ok and q_ok and x_ok
                lines.append(",".join([
                    str(i), repr(float(np.linalg.norm(ml.x_hat[i]))),
                    _fmt(float(np.linalg.norm(x_final)) if x_final is not None
                         else None),
                    _fmt(err),
                    _fmt(q.gap_at_d) if q else "", _fmt(q.bound_at_d) if q else "",
                    str(q_ok), _fmt(x.weighted_error) if x else "",
                    _fmt(x.bound) if x else "", str(x_ok),
                ]))
            summary.append(f"all_bounds_satisfied={all_ok}")
        except GbpwlsError as exc:
            summary.append(f"analysis unavailable: {exc}")
    (out / "comparison.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    click.echo(f"report written to {out_dir}")


if __name__ == "__main__":
    main()
