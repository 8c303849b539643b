"""Probes of the sliced energy landscape around candidate critical points.

Contains the closed-form critical clouds (segment against the
sliced-uniform disk, Gaussian quantile line against the isotropic
Gaussian), perturbation scans along vector fields and along the
split-translation construction, and the cell-structure analysis of the
fixed-direction estimator F_L, which is piecewise quadratic over
permutation cells.

Convention: perturbation curves report SW_2^2 = 2 F, matching the usual
way these scans are plotted; the fixed-direction kink scan reports the
per-direction average W_2^2 = 2 F_L, so a single direction with exact
ties contributes the closed form 1/3 - |t| + t^2 against the unit disk
target.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .directions import DirectionSet
from .swgrad import PointCloud, SlicedEvaluator
from .targets import ProjectedTarget


class TieInDirection(Exception):
    """Two particles project identically along a test direction."""

    def __init__(self, direction_index):
        self.direction_index = direction_index
        super().__init__(
            f"tied projections along direction index {direction_index}")


@dataclass(frozen=True)
class PerturbationCurve:
    """Scan of SW_2^2 (or averaged W_2^2 for fixed directions) along t."""

    ts: np.ndarray
    values: np.ndarray
    mode: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if ts.shape != values.shape or ts.ndim != 1:
            raise ValueError("ts and values must be 1D arrays of equal length")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("ts must be strictly increasing")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "values", values)

    def value_at(self, t, atol=1e-9):
        idx = int(np.argmin(np.abs(self.ts - t)))
        if abs(self.ts[idx] - t) > atol:
            raise ValueError(f"t={t} is not on the scanned grid")
        return float(self.values[idx])

    def is_local_max_at_zero(self, deltas):
        """True when value(+/-delta) < value(0) for every requested delta."""
        v0 = self.value_at(0.0)
        return all(self.value_at(d) < v0 and self.value_at(-d) < v0
                   for d in deltas)

    def write_csv(self, stream):
        stream.write("t,value\n")
        for t, v in zip(self.ts, self.values):
            stream.write(f"{float(t)!r},{float(v)!r}\n")


@dataclass(frozen=True)
class CellDescriptor:
    """Quadratic structure of F_L on the permutation cell containing X.

    F_L(X) = q(X) + c0 with q the per-particle quadratic form built from
    the direction family and the matched cell barycenters; the common
    per-particle Hessian block is (1/N) sum_l w_l theta_l theta_l^T.
    """

    permutations: np.ndarray
    hessian_block: np.ndarray
    hessian_eigenvalues: np.ndarray
    linear_coeffs: np.ndarray
    quadratic_value: float
    c0: float
    fl_value: float
    hessian_psd: bool
    strictly_convex: bool

    def to_json(self) -> str:
        return json.dumps({
            "permutations": self.permutations.tolist(),
            "hessian_block": self.hessian_block.tolist(),
            "hessian_eigenvalues": self.hessian_eigenvalues.tolist(),
            "quadratic_value": self.quadratic_value,
            "c0": self.c0,
            "fl_value": self.fl_value,
            "hessian_psd": self.hessian_psd,
            "strictly_convex": self.strictly_convex,
        })


def segment_critical_cloud(n_points) -> PointCloud:
    """N equispaced points on [-4/pi, 4/pi] x {0}.

    Discretizes the segment measure that is critical for the
    sliced-uniform disk.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    half = 4.0 / math.pi
    xs = -half + 2.0 * half * np.arange(n_points) / (n_points - 1)
    return PointCloud(np.column_stack([xs, np.zeros(n_points)]))


def line_scale_alpha(dirs: DirectionSet) -> float:
    """alpha_d = d * sum_l w_l |<theta_l, e_1>|, the Gaussian line scale.

    Converges to d * E|theta_1| (4/pi in the plane) as the direction set
    refines.
    """
    return float(dirs.dim * np.dot(dirs.weights, np.abs(dirs.dirs[:, 0])))


def gaussian_line_critical_cloud(n_points, dim, dirs: DirectionSet) -> PointCloud:
    """Quantile discretization of the axis-supported Gaussian critical line.

    Points sit at alpha_d * Phi^{-1}((i - 1/2)/N) on the first axis,
    where the scale alpha_d is computed on the supplied direction set.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if dirs.dim != dim:
        raise ValueError("direction set dimension mismatch")
    alpha = line_scale_alpha(dirs)
    xs = alpha * ndtri((np.arange(n_points) + 0.5) / n_points)
    points = np.zeros((n_points, dim))
    points[:, 0] = xs
    return PointCloud(points)


def dumbbell_cloud(n_segment=50, n_ring=25, half_width=0.8, ring_center=1.5,
                   ring_radius=0.3):
    """Composite cloud: a horizontal central bar joining two rings.

    Returns (PointCloud, mask) where the mask selects the bar points,
    the part to perturb when probing instability of the embedded
    segment.
    """
    if n_segment < 2 or n_ring < 1:
        raise ValueError("need at least 2 bar points and 1 ring point")
    xs = np.linspace(-half_width, half_width, n_segment)
    bar = np.column_stack([xs, np.zeros(n_segment)])
    angles = 2.0 * np.pi * np.arange(n_ring) / n_ring
    ring = np.column_stack([ring_radius * np.cos(angles),
                            ring_radius * np.sin(angles)])
    left = ring + np.array([-ring_center, 0.0])
    right = ring + np.array([ring_center, 0.0])
    points = np.vstack([bar, left, right])
    mask = np.zeros(len(points), dtype=bool)
    mask[:n_segment] = True
    return PointCloud(points), mask


def alternating_field(n_points, dim=2, axis=1, mask=None):
    """Vector field alternating +/- e_axis; zero outside the mask."""
    xi = np.zeros((n_points, dim))
    signs = np.where(np.arange(n_points) % 2 == 0, 1.0, -1.0)
    if mask is not None:
        signs = signs * np.asarray(mask, dtype=float)
    xi[:, axis] = signs
    return xi


def perturb_vector_field(X: PointCloud, xi, ts, target: ProjectedTarget,
                         dirs: DirectionSet, threads: int = 1,
                         use_fixed_estimator: bool = False) -> PerturbationCurve:
    """Scan t -> SW_2^2 of the cloud displaced along the vector field xi."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != X.points.shape:
        raise ValueError("xi must have one vector per particle")
    ts = np.asarray(ts, dtype=float)
    evaluator = SlicedEvaluator(target, dirs, X.n_points, threads)
    values = np.array([2.0 * evaluator.energy(X.points + t * xi) for t in ts])
    mode = "kink" if use_fixed_estimator else "vector_field"
    return PerturbationCurve(ts=ts, values=values, mode=mode, metadata={
        "target": target.kind,
        "n_points": X.n_points,
        "n_directions": dirs.n_directions,
        "convention": "sw2_squared",
    })


def perturb_split_translation(X: PointCloud, n_hat, ts,
                              target: ProjectedTarget, dirs: DirectionSet,
                              threads: int = 1) -> PerturbationCurve:
    """Scan the split-translation probe: half the mass shifted by +t n,
    half by -t n, realized as a 2N-point cloud.

    Only the planar case is supported; this is the regime where the
    probe certifies instability of segment-supported critical clouds.
    """
    if X.dim != 2:
        raise ValueError("split-translation probe requires dim 2")
    n_hat = np.asarray(n_hat, dtype=float)
    if abs(np.linalg.norm(n_hat) - 1.0) > 1e-9:
        raise ValueError("n_hat must be a unit vector")
    ts = np.asarray(ts, dtype=float)
    evaluator = SlicedEvaluator(target, dirs, 2 * X.n_points, threads)
    values = np.empty(len(ts))
    for j, t in enumerate(ts):
        doubled = np.vstack([X.points - t * n_hat, X.points + t * n_hat])
        values[j] = 2.0 * evaluator.energy(doubled)
    return PerturbationCurve(ts=ts, values=values, mode="split_translation",
                             metadata={
                                 "target": target.kind,
                                 "n_points": X.n_points,
                                 "n_directions": dirs.n_directions,
                                 "convention": "sw2_squared",
                             })


def quadratic_envelope_interval(curve: PerturbationCurve, coefficient):
    """Largest symmetric grid interval where value(t) <= value(0) - c t^2.

    Returns the endpoint (a positive grid value) or None when even the
    smallest nonzero |t| fails the envelope.
    """
    v0 = curve.value_at(0.0)
    pos = curve.ts[curve.ts > 0]
    best = None
    for t in pos:
        ok_pos = curve.value_at(t) <= v0 - coefficient * t * t
        ok_neg = curve.value_at(-t) <= v0 - coefficient * t * t
        if ok_pos and ok_neg:
            best = float(t)
        else:
            break
    return best


def analyze_cell(X: PointCloud, target: ProjectedTarget,
                 fixed_dirs: DirectionSet) -> CellDescriptor:
    """Quadratic decomposition F_L = q + c0 on the current permutation cell.

    Requires tie-free projections along every test direction; a tie means
    X sits on a cell boundary where the permutations are ambiguous.
    """
    n = X.n_points
    proj = X.points @ fixed_dirs.dirs.T
    perms = np.empty((fixed_dirs.n_directions, n), dtype=int)
    q_total = 0.0
    c0_total = 0.0
    linear = np.zeros_like(X.points)
    for l in range(fixed_dirs.n_directions):
        col = proj[:, l]
        if len(np.unique(col)) < n:
            raise TieInDirection(l)
        order = np.argsort(col, kind="stable")
        perms[l] = order
        table = target.cell_table(fixed_dirs.dirs[l], n)
        w = fixed_dirs.weights[l]
        diff = col[order] - table.barycenters
        q_total += w * 0.5 * np.sum(diff * diff) / n
        c0_total += w * 0.5 * np.sum(table.second_moments
                                     - table.barycenters ** 2) / n
        b_assigned = np.empty(n)
        b_assigned[order] = table.barycenters
        linear += w * b_assigned[:, None] * fixed_dirs.dirs[l][None, :] / n
    hessian_block = fixed_dirs.second_moment() / n
    eigvals = np.linalg.eigvalsh(hessian_block)
    fl_value = SlicedEvaluator(target, fixed_dirs, n).energy(X.points)
    return CellDescriptor(
        permutations=perms,
        hessian_block=hessian_block,
        hessian_eigenvalues=eigvals,
        linear_coeffs=linear,
        quadratic_value=q_total,
        c0=c0_total,
        fl_value=fl_value,
        hessian_psd=bool(eigvals[0] >= -1e-14),
        strictly_convex=bool(eigvals[0] > 1e-12),
    )


def kink_scan(X: PointCloud, xi, target: ProjectedTarget,
              fixed_dirs: DirectionSet, ts, threads: int = 1):
    """Scan the fixed-direction estimator along xi and measure the slope
    jump at t = 0 from one-sided differences at the smallest |t|.

    Returns (curve, slope_jump).  The plotted quantity is the averaged
    W_2^2 (twice F_L); with a direction exactly orthogonal to the
    perturbed segment in the family the jump is -2/L, otherwise it is
    zero up to grid resolution.
    """
    ts = np.asarray(ts, dtype=float)
    if not np.any(ts == 0.0):
        raise ValueError("grid must contain t = 0")
    if not (np.any(ts > 0) and np.any(ts < 0)):
        raise ValueError("grid must contain points on both sides of 0")
    curve = perturb_vector_field(X, xi, ts, target, fixed_dirs,
                                 threads=threads, use_fixed_estimator=True)
    t_right = float(np.min(ts[ts > 0]))
    t_left = float(np.max(ts[ts < 0]))
    v0 = curve.value_at(0.0)
    right_slope = (curve.value_at(t_right) - v0) / t_right
    left_slope = (v0 - curve.value_at(t_left)) / (-t_left)
    return curve, right_slope - left_slope
