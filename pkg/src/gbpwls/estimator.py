"""Estimator-style wrapper around the message engine.

Follows the fit/get_params/set_params convention so the engine can slot into
pipelines expecting that interface, without depending on scikit-learn.
"""
from __future__ import annotations

from . import messages
from .graph import MeasurementGraph


class GaussianBPEstimator:
    """Distributed Gaussian state estimator driven to a fixed point.

    Parameters
    ----------
    max_iters : iteration cap for the message engine.
    tol : relative change threshold on estimates and information matrices.

    After fit: x_hat_, Sigma_, Q_ per node, trace_ (all belief states),
    termination_ ("converged" / "diverged" / "iteration cap"), n_iter_.
    """

    def __init__(self, max_iters: int = 500, tol: float = 1e-10):
        self.max_iters = max_iters
        self.tol = tol

    def get_params(self, deep: bool = True):
        return {"max_iters": self.max_iters, "tol": self.tol}

    def set_params(self, **params):
        for key, value in params.items():
            if key not in ("max_iters", "tol"):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, graph: MeasurementGraph):
        graph.ensure_valid()
        trace, reason = messages.run(graph, self.max_iters, self.tol)
        final = trace[-1]
        self.trace_ = trace
        self.termination_ = reason
        self.n_iter_ = final.iteration
        self.x_hat_ = dict(final.x_hat)
        self.Sigma_ = dict(final.Sigma)
        self.Q_ = dict(final.Q)
        return self
