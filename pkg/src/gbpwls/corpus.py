"""Built-in test graphs covering the qualitative regimes of the analysis.

Topologies: rings of several sizes (single cycle, stable), a ring with a
pendant chain (leaf pruning), a random 15-node tree (exactness), the
complete graph K5 (dense, stable), a vector-state ring (2-dim nodes), and a
dense 7-node graph tuned to the unstable regime.  Self noise defaults
follow the simulation protocol (R_i = 5, R_ij = 1) where the dominance
condition allows; graphs with leaves use a tighter self covariance so the
condition holds there too.

All builders return graphs with zero measurement values; use
randomness.seeded_instance to realize a measurement set.
"""
from __future__ import annotations

import itertools

import numpy as np

from .graph import EdgeSpec, MeasurementGraph, NodeSpec, SelfMeasurement


def _scalar_node(i, r_self):
    return NodeSpec(i, 1, SelfMeasurement([[1.0]], [[r_self]], [0.0]))


def _scalar_edge(i, j, r_edge=1.0, cij=1.0, cji=1.0):
    return EdgeSpec(i, j, [[cij]], [[cji]], [[r_edge]], [0.0])


def ring(n: int, r_self: float = 5.0, r_edge: float = 1.0) -> MeasurementGraph:
    nodes = [_scalar_node(i, r_self) for i in range(1, n + 1)]
    edges = [_scalar_edge(i, i % n + 1, r_edge) for i in range(1, n + 1)]
    return MeasurementGraph(nodes, edges).ensure_valid()


def ring_with_pendant(n: int = 4, chain: int = 3,
                      r_self: float = 0.5) -> MeasurementGraph:
    """Ring of n nodes with a pendant chain attached to node 1.

    Self covariance 0.5 keeps the dominance condition valid at the chain's
    degree-1 end.
    """
    total = n + chain
    nodes = [_scalar_node(i, r_self) for i in range(1, total + 1)]
    edges = [_scalar_edge(i, i % n + 1) for i in range(1, n + 1)]
    prev = 1
    for t in range(n + 1, total + 1):
        edges.append(_scalar_edge(prev, t))
        prev = t
    return MeasurementGraph(nodes, edges).ensure_valid()


def random_tree(n: int = 15, seed: int = 2026,
                r_self: float = 0.5) -> MeasurementGraph:
    """Random labelled tree via a seeded random attachment process."""
    rng = np.random.default_rng(seed)
    nodes = [_scalar_node(i, r_self) for i in range(1, n + 1)]
    edges = []
    for i in range(2, n + 1):
        parent = int(rng.integers(1, i))
        edges.append(_scalar_edge(parent, i))
    return MeasurementGraph(nodes, edges).ensure_valid()


def complete(n: int = 5, r_self: float = 5.0) -> MeasurementGraph:
    nodes = [_scalar_node(i, r_self) for i in range(1, n + 1)]
    edges = [_scalar_edge(i, j) for i, j in
             itertools.combinations(range(1, n + 1), 2)]
    return MeasurementGraph(nodes, edges).ensure_valid()


def vector_ring(n: int = 8, dim: int = 2, r_self: float = 5.0,
                r_edge: float = 1.0) -> MeasurementGraph:
    """Ring with dim-dimensional node states and full-block joint measurements."""
    eye = np.eye(dim)
    nodes = [NodeSpec(i, dim, SelfMeasurement(eye, r_self * eye, np.zeros(dim)))
             for i in range(1, n + 1)]
    edges = [EdgeSpec(i, i % n + 1, eye, eye, r_edge * eye, np.zeros(dim))
             for i in range(1, n + 1)]
    return MeasurementGraph(nodes, edges).ensure_valid()


def dense_unstable() -> MeasurementGraph:
    """Dense 7-node graph in the unstable message-dynamics regime.

    Parameters found by numerically maximizing the spectral radius of the
    asymptotic dynamics matrix; see dense7_params below.
    """
    Cij, Cji, Rij, Ri = dense7_params()
    el = list(itertools.combinations(range(1, 8), 2))
    eye = np.eye(2)
    nodes = [NodeSpec(i, 2, SelfMeasurement(eye, Ri[i - 1] * eye, np.zeros(2)))
             for i in range(1, 8)]
    edges = [EdgeSpec(i, j, a.reshape(1, -1), b.reshape(1, -1), [[r]], [0.0])
             for (i, j), a, b, r in zip(el, Cij, Cji, Rij)]
    return MeasurementGraph(nodes, edges).ensure_valid()


def dense7_params():
    """Frozen parameters for the unstable dense graph.

    2-dim node states with rank-1 joint measurement rows; the asymptotic
    dynamics matrix has spectral radius 1.2427, so message passing diverges
    for almost every measurement realization.  Found by hill-climbing the
    radius over row directions and noise levels; do not edit by hand.
    """
    Cij = np.array([
        [0.08113971427869385, -0.9967027374131024],
        [0.9352377204145269, -0.35402034731613835],
        [-0.006338457163134113, 0.9999799117786272],
        [-0.008315977081090452, -0.9999654216647628],
        [0.7993855218435846, -0.6008184313641352],
        [-0.45946869671518414, -0.8881939634667926],
        [0.8020661304901555, -0.5972352319819627],
        [0.9907350354980226, -0.13580901824522573],
        [0.7631815202403549, -0.6461841588615592],
        [0.7681050976800801, -0.6403237922472307],
        [0.8670995143750259, -0.4981349537731661],
        [-0.51901399040987, 0.8547657443760971],
        [0.9293223041279113, 0.3692696237851008],
        [0.7793275718998967, 0.6266167374692535],
        [-0.022251682788458207, -0.9997524006538228],
        [0.5519562406214705, 0.8338730769361806],
        [0.5085928034053993, -0.8610071778587196],
        [-0.9758952416027217, 0.21823949554827493],
        [-0.6498049482157282, 0.7601009993904461],
        [0.8695277557484136, -0.49388407747479296],
        [-0.4566207180924288, 0.8896614635965495],
    ])
    Cji = np.array([
        [-0.5230854177755505, 0.8522802624199259],
        [0.4994731584985908, 0.8663293622747884],
        [0.9150500578826304, -0.40334029251860615],
        [-0.3323562950654466, 0.9431539074458473],
        [0.2695004522647924, -0.9630002628395655],
        [0.00015648245870884329, -0.99999998775662],
        [0.35151682507911797, 0.936181564487518],
        [0.5596504345795884, -0.8287287801656691],
        [0.9634584154124826, 0.2678579507329738],
        [0.3532693517755999, -0.9355216539963398],
        [-0.3388534891118131, -0.9408391535840493],
        [-0.5341870870420194, 0.8453662851318131],
        [-0.8192650876525897, 0.5734149598271696],
        [-0.9774466217346388, 0.21118262632030554],
        [0.9972855104802438, 0.07363158687791174],
        [-0.6353891880741127, 0.7721920613930966],
        [0.9053652372846339, 0.42463370935023353],
        [-0.31700359977794956, -0.9484243342132368],
        [-0.6677197915673917, 0.7444127080787908],
        [-0.43244894677079276, -0.9016584211533945],
        [0.3826833736611559, 0.9238795568272502],
    ])
    Rij = np.array([
        0.05701028593074548, 0.7524945516163298, 0.06928041437179105,
        0.059594695462560715, 28.90479805472766, 20.082475606279804,
        0.060953595003796116, 0.048544234750388944, 0.21510190685749345,
        19.39376612761595, 19.78659351688007, 0.03921447274102139,
        0.043357342157293394, 9.709815038666466, 7.798242066230816,
        0.14946895478800434, 14.462033593846279, 11.47078042210312,
        20.898002823044788, 13.05798930252216, 10.252060978496932,
    ])
    Ri = np.array([
        115.52911439315149, 79.81061856702122, 79.86822558066508,
        145.55420056335498, 141.33761258732443, 110.47799934161169,
        69.80317103962615,
    ])
    return Cij, Cji, Rij, Ri


CORPUS = {
    "ring6": lambda: ring(6),
    "ring8": lambda: ring(8),
    "ring10": lambda: ring(10),
    "ring12": lambda: ring(12),
    "ring-pendant": ring_with_pendant,
    "tree15": random_tree,
    "k5": complete,
    "vector-ring8": vector_ring,
    "dense7": dense_unstable,
}


def build(name: str) -> MeasurementGraph:
    try:
        maker = CORPUS[name]
    except KeyError:
        raise KeyError(f"unknown corpus graph {name!r}; "
                       f"choices: {sorted(CORPUS)}")
    return maker()
