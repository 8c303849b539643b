"""Monitored fixed-step gradient descent on the sliced energy.

Each iteration records energy, gradient norm, minimum pairwise
separation, and the slack in the descent inequality
F(X^{k+1}) - F(X^k) <= -lambda (1 - lambda/(2Nd)) |grad F(X^k)|^2,
which must stay nonpositive (up to roundoff) for steps below 2Nd.
The step is specified as a multiple of N, matching the usual reporting
of step sizes for this objective (the theoretical sweet spot is
lambda = Nd, i.e. multiple d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .directions import DirectionSet
from .swgrad import OnDiagonal, PointCloud, SlicedEvaluator
from .targets import ProjectedTarget

#: A run is flagged diverged when the energy exceeds this multiple of
#: its initial value.
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class DescentConfig:
    """Parameters of one descent run.

    step_multiple is lambda/N; grad_tol defaults to 1e-8 * N (the
    residual field N*grad is the scale-free criticality measure).
    """

    step_multiple: float
    max_iters: int
    grad_tol: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.step_multiple <= 0:
            raise ValueError("step_multiple must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def resolved_grad_tol(self, n_points):
        return self.grad_tol if self.grad_tol is not None else 1e-8 * n_points


@dataclass
class DescentTrace:
    """Per-iteration monitoring of a descent run.

    Row k describes iterate X^k; lemma_slack[k] compares F(X^{k+1}) with
    the descent inequality at X^k and is NaN on the final row.
    """

    energy: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    min_sep: list = field(default_factory=list)
    lemma_slack: list = field(default_factory=list)
    stop_reason: str = "max_iters"

    @property
    def n_rows(self):
        return len(self.energy)

    def rows(self):
        for k in range(self.n_rows):
            yield (k, float(self.energy[k]), float(self.grad_norm[k]),
                   float(self.min_sep[k]), float(self.lemma_slack[k]))

    def write_csv(self, stream):
        stream.write("k,energy,grad_norm,min_sep,lemma_slack\n")
        for k, e, g, s, slack in self.rows():
            slack_txt = "" if math.isnan(slack) else repr(slack)
            stream.write(f"{k},{e!r},{g!r},{s!r},{slack_txt}\n")


def _has_diverged(current, initial):
    if not math.isfinite(current):
        return True
    return current > DIVERGENCE_FACTOR * abs(initial) and current > initial


def uniform_box_cloud(n_points, lo, hi, dim=2, seed=0) -> PointCloud:
    """N points sampled uniformly in the box [lo, hi]^dim."""
    rng = np.random.default_rng(seed)
    return PointCloud(rng.uniform(lo, hi, size=(n_points, dim)))


def run_descent(X0: PointCloud, target: ProjectedTarget, dirs: DirectionSet,
                cfg: DescentConfig, threads: int = 1):
    """Fixed-step descent X <- X - lambda grad F(X) with full monitoring.

    Returns the final cloud and the trace.  Raises OnDiagonal if X0 has
    coincident particles; a diverging run stops cleanly with stop_reason
    'diverged'.
    """
    n = X0.n_points
    d = X0.dim
    lam = cfg.step_multiple * n
    grad_tol = cfg.resolved_grad_tol(n)
    slack_coeff = lam * (1.0 - lam / (2.0 * n * d))
    evaluator = SlicedEvaluator(target, dirs, n, threads)

    trace = DescentTrace()
    points = X0.points.copy()
    report = evaluator.grad_p2(points)
    initial_energy = report.energy
    stop_reason = "max_iters"
    for k in range(cfg.max_iters):
        cloud = PointCloud(points)
        trace.energy.append(report.energy)
        trace.grad_norm.append(report.grad_norm)
        trace.min_sep.append(cloud.min_separation())
        if report.grad_norm <= grad_tol:
            stop_reason = "converged"
            trace.lemma_slack.append(math.nan)
            break
        if _has_diverged(report.energy, initial_energy):
            stop_reason = "diverged"
            trace.lemma_slack.append(math.nan)
            break
        new_points = points - lam * report.grads
        if not np.all(np.isfinite(new_points)):
            stop_reason = "diverged"
            trace.lemma_slack.append(math.nan)
            break
        try:
            new_report = evaluator.grad_p2(new_points)
        except OnDiagonal:
            # only possible for steps above Nd; treat as a failed run
            stop_reason = "diverged"
            trace.lemma_slack.append(math.nan)
            break
        trace.lemma_slack.append(new_report.energy - report.energy
                                 + slack_coeff * report.grad_norm ** 2)
        points = new_points
        report = new_report
    else:
        cloud = PointCloud(points)
        trace.energy.append(report.energy)
        trace.grad_norm.append(report.grad_norm)
        trace.min_sep.append(cloud.min_separation())
        trace.lemma_slack.append(math.nan)
        if report.grad_norm <= grad_tol:
            stop_reason = "converged"
        elif _has_diverged(report.energy, initial_energy):
            stop_reason = "diverged"
    trace.stop_reason = stop_reason
    return PointCloud(points), trace


def sphere_mean_abs_coordinate(dim):
    """Mean of |theta_1| for theta uniform on S^{d-1}.

    Equals Gamma(d/2) / (sqrt(pi) Gamma((d+1)/2)); 2/pi in the plane.
    """
    return math.exp(gammaln(dim / 2.0) - gammaln((dim + 1) / 2.0)) / math.sqrt(math.pi)


def check_separation_bound(X: PointCloud, target: ProjectedTarget):
    """Critical-point separation bound d*C(d)/(N*beta) and its verdict.

    Returns (bound, satisfied); (None, None) when the target has no
    uniform projected-density bound.
    """
    beta = target.density_bound()
    if beta is None:
        return None, None
    c = sphere_mean_abs_coordinate(X.dim)
    bound = X.dim * c / (X.n_points * beta)
    satisfied = X.min_separation() >= bound - 1e-9
    return bound, satisfied


def step_size_sweep(X0: PointCloud, target: ProjectedTarget,
                    dirs: DirectionSet, multiples, iters, threads: int = 1):
    """Run descent from the same start for each step multiple.

    Returns a list of (multiple, final_cloud, trace) in input order.
    """
    out = []
    for m in multiples:
        cfg = DescentConfig(step_multiple=m, max_iters=iters, grad_tol=0.0)
        cloud, trace = run_descent(X0, target, dirs, cfg, threads=threads)
        out.append((m, cloud, trace))
    return out
