"""Deterministic, cross-language-reproducible measurement generation.

Every random stream is identified by (seed, label).  The stream key is the
first 16 bytes of SHA-256("gbpwls:<seed>:<label>") interpreted as a
big-endian 128-bit integer and used as the key of a Philox 4x64 counter
generator with counter starting at zero.  Standard normals are produced by
inverse-CDF: each raw 64-bit word w maps to u = ((w >> 11) + 0.5) * 2**-53,
a uniform strictly inside (0, 1), and then to ndtri(u).  Correlated noise is
L @ n with L the lower Cholesky factor of the covariance.
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

from .graph import EdgeSpec, MeasurementGraph, NodeSpec, SelfMeasurement


def stream_key(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"gbpwls:{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:16], "big")


def raw_words(seed: int, label: str, n: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=stream_key(seed, label)))
    return gen.integers(0, 2 ** 64, size=n, dtype=np.uint64)


def standard_normals(seed: int, label: str, n: int) -> np.ndarray:
    w = raw_words(seed, label, n)
    u = ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def correlated_noise(seed: int, label: str, R: np.ndarray) -> np.ndarray:
    L = np.linalg.cholesky(np.asarray(R, float))
    return L @ standard_normals(seed, label, R.shape[0])


def draw_x_true(graph: MeasurementGraph, seed: int) -> dict:
    return {i: standard_normals(seed, f"xtrue:{i}", graph.node(i).dim)
            for i in graph.node_ids}


def realize_measurements(graph: MeasurementGraph, x_true: dict, seed: int,
                         noise_free: bool = False):
    """(z_self per node, z_edge per canonical pair) for the given truth."""
    z_self = {}
    for i in graph.node_ids:
        sm = graph.node(i).self_meas
        if sm is None:
            continue
        z = np.asarray(sm.C) @ x_true[i]
        if not noise_free:
            z = z + correlated_noise(seed, f"self:{i}", sm.R)
        z_self[i] = z
    z_edge = {}
    for e in graph.edges:
        z = np.asarray(e.C_ij) @ x_true[e.i] + np.asarray(e.C_ji) @ x_true[e.j]
        if not noise_free:
            z = z + correlated_noise(seed, f"edge:{e.i}:{e.j}", e.R)
        z_edge[(e.i, e.j)] = z
    return z_self, z_edge


def with_measurements(graph: MeasurementGraph, z_self: dict,
                      z_edge: dict) -> MeasurementGraph:
    """Copy of the graph with measurement values replaced."""
    nodes = []
    for i in graph.node_ids:
        n = graph.node(i)
        sm = n.self_meas
        if sm is not None and i in z_self:
            sm = SelfMeasurement(sm.C, sm.R, z_self[i])
        nodes.append(NodeSpec(n.id, n.dim, sm))
    edges = []
    for e in graph.edges:
        z = z_edge.get((e.i, e.j), e.z)
        edges.append(EdgeSpec(e.i, e.j, e.C_ij, e.C_ji, e.R, z))
    return MeasurementGraph(nodes, edges)


def seeded_instance(graph: MeasurementGraph, seed: int,
                    noise_free: bool = False) -> MeasurementGraph:
    """Graph with measurements generated from a seeded random truth."""
    x_true = draw_x_true(graph, seed)
    z_self, z_edge = realize_measurements(graph, x_true, seed, noise_free)
    return with_measurements(graph, z_self, z_edge)
