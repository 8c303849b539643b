"""Target measures viewed through their 1D projections.

Everything downstream (energies, gradients, descent) interrogates the
target rho only through the law of its projection along a direction
theta: quantile values, the N cells of equal mass 1/N in quantile space,
their barycenters and second moments, and signed power moments against a
reference point.  This module provides those queries for four target
kinds:

- SlicedUniformDisk: the planar density (1/2pi)(1-|x|^2)^(-1/2) on the
  unit disk, whose projection along every direction is uniform on
  [-r, r].
- IsotropicGaussian: standard normal in R^d (optionally scaled), whose
  projections are all N(0, sigma^2).
- EmpiricalCloud: a weighted atomic measure; projections are atomic and
  cells come from the monotone block decomposition (sort atoms, sweep
  cumulative mass, split atoms straddling a k/N boundary fractionally).
- LineSegmentUniform: uniform measure on a segment; projections are
  uniform on an interval that may degenerate to a point.

Cells are indexed i = 1..N with V_i the quantile preimage of
[(i-1)/N, i/N]; arrays are 0-based so cell i lives at index i-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

#: Gauss-Legendre node count per cell (or sub-cell) for power moments of
#: order p > 2; p = 2 always uses closed forms.
GL_NODES = 32

_gl_nodes, _gl_weights = np.polynomial.legendre.leggauss(GL_NODES)


def _phi(z):
    """Standard normal density."""
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class CellTable:
    """Per-direction cell summary for a target split into N mass-1/N cells.

    barycenters[i] = N * integral of x over cell i+1, second_moments[i] =
    N * integral of x^2, cell_masses[i] = 1/N.
    """

    n_cells: int
    barycenters: np.ndarray
    second_moments: np.ndarray
    cell_masses: np.ndarray

    def __post_init__(self):
        n = self.n_cells
        if self.barycenters.shape != (n,) or self.second_moments.shape != (n,):
            raise ValueError("cell arrays must have length n_cells")
        object.__setattr__(self, "barycenters", np.asarray(self.barycenters, dtype=float))
        object.__setattr__(self, "second_moments", np.asarray(self.second_moments, dtype=float))
        object.__setattr__(self, "cell_masses", np.asarray(self.cell_masses, dtype=float))


class _Law1D:
    """Law of one projected coordinate; subclasses implement the queries."""

    def quantile(self, t):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def cell_table(self, n_cells):
        raise NotImplementedError

    def signed_power_moments(self, n_cells, a, p):
        """Per-cell integral of sgn(a_i - x)|a_i - x|^(p-1) d(law), i = 1..N.

        a is one reference value per cell.
        """
        raise NotImplementedError

    def abs_power_moments(self, n_cells, a, p):
        """Per-cell integral of |a_i - x|^p d(law)."""
        raise NotImplementedError


class _QuantileLaw(_Law1D):
    """Law with a smooth quantile function; integrates in quantile space.

    Integrals over a cell become integrals over a t-interval of length
    1/N: int_{V_i} g(x) d(law) = int g(Q(t)) dt.  This handles unbounded
    cells (Gaussian tails) without special cases since Gauss-Legendre
    nodes stay in the open interval.
    """

    def _gl_integrate(self, lo, hi, func):
        """Vectorized Gauss-Legendre of func(Q(t)) over intervals [lo, hi]."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        # nodes shaped (n_intervals, GL_NODES)
        t = mid[:, None] + half[:, None] * _gl_nodes[None, :]
        vals = func(self.quantile(t))
        return half * (vals @ _gl_weights)

    def signed_power_moments(self, n_cells, a, p):
        a = np.asarray(a, dtype=float)
        edges = np.arange(n_cells + 1) / n_cells
        lo, hi = edges[:-1], edges[1:]
        # split each cell at the reference point so the integrand is
        # smooth on both sides of the sign change
        split = np.clip(self.cdf(a), lo, hi)
        left = self._gl_integrate_ref(lo, split, a, p, sign=1.0)
        right = self._gl_integrate_ref(split, hi, a, p, sign=-1.0)
        return left + right

    def abs_power_moments(self, n_cells, a, p):
        a = np.asarray(a, dtype=float)
        edges = np.arange(n_cells + 1) / n_cells
        lo, hi = edges[:-1], edges[1:]
        split = np.clip(self.cdf(a), lo, hi)
        out = np.zeros(n_cells)
        for s_lo, s_hi in ((lo, split), (split, hi)):
            half = 0.5 * (s_hi - s_lo)
            mid = 0.5 * (s_hi + s_lo)
            t = mid[:, None] + half[:, None] * _gl_nodes[None, :]
            vals = np.abs(a[:, None] - self.quantile(t)) ** p
            out += half * (vals @ _gl_weights)
        return out

    def _gl_integrate_ref(self, lo, hi, a, p, sign):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        t = mid[:, None] + half[:, None] * _gl_nodes[None, :]
        vals = np.abs(a[:, None] - self.quantile(t)) ** (p - 1.0)
        return sign * half * (vals @ _gl_weights)


class _UniformLaw(_QuantileLaw):
    """Uniform on [lo, hi]; degenerates to a Dirac when lo == hi."""

    def __init__(self, lo, hi):
        if hi < lo:
            lo, hi = hi, lo
        self.lo = float(lo)
        self.hi = float(hi)
        self.width = self.hi - self.lo

    def quantile(self, t):
        return self.lo + self.width * np.asarray(t, dtype=float)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.width == 0.0:
            return np.where(x < self.lo, 0.0, 1.0)
        return np.clip((x - self.lo) / self.width, 0.0, 1.0)

    def cell_table(self, n_cells):
        edges = self.lo + self.width * np.arange(n_cells + 1) / n_cells
        a, b = edges[:-1], edges[1:]
        bary = 0.5 * (a + b)
        second = (a * a + a * b + b * b) / 3.0
        return CellTable(n_cells, bary, second, np.full(n_cells, 1.0 / n_cells))

    def signed_power_moments(self, n_cells, a, p):
        if self.width == 0.0:
            a = np.asarray(a, dtype=float)
            d = a - self.lo
            return np.sign(d) * np.abs(d) ** (p - 1.0) / n_cells
        return super().signed_power_moments(n_cells, a, p)

    def abs_power_moments(self, n_cells, a, p):
        if self.width == 0.0:
            a = np.asarray(a, dtype=float)
            return np.abs(a - self.lo) ** p / n_cells
        return super().abs_power_moments(n_cells, a, p)


class _GaussLaw(_QuantileLaw):
    """Normal with mean 0 and standard deviation sigma."""

    def __init__(self, sigma=1.0):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)

    def quantile(self, t):
        return self.sigma * ndtri(np.asarray(t, dtype=float))

    def cdf(self, x):
        return ndtr(np.asarray(x, dtype=float) / self.sigma)

    def cell_table(self, n_cells):
        # truncated-normal moments at quantile knots: with z_i the i/N
        # standard-normal quantile, N * int_{z_{i-1}}^{z_i} x phi = N (phi(z_{i-1}) - phi(z_i))
        # and N * int x^2 phi = 1 + N (z_{i-1} phi(z_{i-1}) - z_i phi(z_i)).
        interior = ndtri(np.arange(1, n_cells) / n_cells)
        z = np.concatenate([[0.0], interior, [0.0]])
        pz = _phi(z)
        zpz = z * pz
        # z phi(z) and phi(z) vanish in the tails; the padded zeros stand
        # in for the limits at -inf and +inf
        pz[0] = pz[-1] = 0.0
        zpz[0] = zpz[-1] = 0.0
        bary = n_cells * (pz[:-1] - pz[1:])
        second = 1.0 + n_cells * (zpz[:-1] - zpz[1:])
        s = self.sigma
        return CellTable(n_cells, s * bary, s * s * second,
                         np.full(n_cells, 1.0 / n_cells))


class _AtomicLaw(_Law1D):
    """Atomic law given by sorted, tie-merged positions with weights."""

    def __init__(self, positions, weights):
        pos = np.asarray(positions, dtype=float)
        w = np.asarray(weights, dtype=float)
        order = np.argsort(pos, kind="stable")
        pos = pos[order]
        w = w[order]
        # merge exact ties so the fractional split is unambiguous
        keep = np.concatenate([[True], np.diff(pos) > 0])
        idx = np.cumsum(keep) - 1
        merged_pos = pos[keep]
        merged_w = np.zeros(len(merged_pos))
        np.add.at(merged_w, idx, w)
        self.positions = merged_pos
        self.weights = merged_w
        self.cum = np.concatenate([[0.0], np.cumsum(merged_w)])
        self.cum[-1] = 1.0

    def quantile(self, t):
        t = np.asarray(t, dtype=float)
        # smallest atom whose cumulative weight reaches t
        j = np.searchsorted(self.cum[1:], t, side="left")
        j = np.minimum(j, len(self.positions) - 1)
        return self.positions[j]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.positions, x, side="right")
        return self.cum[j]

    def _running_integral(self, t, values):
        """Integral of v(Q(u)) du over [0, t] for per-atom values v."""
        cvw = np.concatenate([[0.0], np.cumsum(self.weights * values)])
        k = np.clip(np.searchsorted(self.cum, t, side="right") - 1, 0,
                    len(self.positions) - 1)
        return cvw[k] + (t - self.cum[k]) * values[k]

    def cell_table(self, n_cells):
        edges = np.arange(n_cells + 1) / n_cells
        sx = self._running_integral(edges, self.positions)
        sx2 = self._running_integral(edges, self.positions ** 2)
        bary = n_cells * np.diff(sx)
        second = n_cells * np.diff(sx2)
        return CellTable(n_cells, bary, second, np.full(n_cells, 1.0 / n_cells))

    def _block_weights(self, n_cells, i):
        """Atoms of cell i (1-based) and their fractional weights."""
        lo = (i - 1) / n_cells
        hi = i / n_cells
        j0 = np.clip(np.searchsorted(self.cum, lo, side="right") - 1, 0,
                     len(self.positions) - 1)
        j1 = np.clip(np.searchsorted(self.cum, hi, side="left"), 1,
                     len(self.positions))
        idx = np.arange(j0, j1)
        frac = np.minimum(self.cum[idx + 1], hi) - np.maximum(self.cum[idx], lo)
        frac = np.clip(frac, 0.0, None)
        return self.positions[idx], frac

    def signed_power_moments(self, n_cells, a, p):
        a = np.asarray(a, dtype=float)
        out = np.zeros(n_cells)
        for i in range(1, n_cells + 1):
            x, w = self._block_weights(n_cells, i)
            d = a[i - 1] - x
            out[i - 1] = np.dot(w, np.sign(d) * np.abs(d) ** (p - 1.0))
        return out

    def abs_power_moments(self, n_cells, a, p):
        a = np.asarray(a, dtype=float)
        out = np.zeros(n_cells)
        for i in range(1, n_cells + 1):
            x, w = self._block_weights(n_cells, i)
            out[i - 1] = np.dot(w, np.abs(a[i - 1] - x) ** p)
        return out


class ProjectedTarget:
    """Base class answering per-direction questions about a target measure."""

    dim: int
    kind: str

    def _law(self, theta) -> _Law1D:
        raise NotImplementedError

    def _check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must be a vector of length {self.dim}")
        if abs(np.linalg.norm(theta) - 1.0) > 1e-9:
            raise ValueError("theta must be a unit vector")
        return theta

    def quantile(self, theta, t):
        theta = self._check_theta(theta)
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr <= 0.0) or np.any(t_arr >= 1.0):
            raise ValueError("t must lie in the open interval (0, 1)")
        out = self._law(theta).quantile(t_arr)
        return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out

    def cell_table(self, theta, n_cells) -> CellTable:
        theta = self._check_theta(theta)
        if n_cells < 1:
            raise ValueError("n_cells must be >= 1")
        return self._law(theta).cell_table(int(n_cells))

    def density_bound(self):
        """Uniform upper bound on the projected densities, or None."""
        return None

    def cell_integral_p(self, theta, n_cells, i, a, p):
        """Integral of sgn(a - x)|a - x|^(p-1) over cell i (1-based)."""
        theta = self._check_theta(theta)
        if p < 2:
            raise ValueError("p must be >= 2")
        if not 1 <= i <= n_cells:
            raise ValueError("cell index out of range")
        if p == 2:
            table = self._law(theta).cell_table(int(n_cells))
            return (a - table.barycenters[i - 1]) / n_cells
        ref = np.full(int(n_cells), float(a))
        return float(self._law(theta).signed_power_moments(int(n_cells), ref, p)[i - 1])

    def signed_power_moments(self, theta, n_cells, a, p):
        """Per-cell sgn(a_i - x)|a_i - x|^(p-1) integrals, one a per cell."""
        theta = self._check_theta(theta)
        if p < 2:
            raise ValueError("p must be >= 2")
        a = np.asarray(a, dtype=float)
        if a.shape != (n_cells,):
            raise ValueError("need one reference value per cell")
        if p == 2:
            table = self._law(theta).cell_table(int(n_cells))
            return (a - table.barycenters) / n_cells
        return self._law(theta).signed_power_moments(int(n_cells), a, p)

    def abs_power_moments(self, theta, n_cells, a, p):
        """Per-cell |a_i - x|^p integrals, one a per cell."""
        theta = self._check_theta(theta)
        a = np.asarray(a, dtype=float)
        if a.shape != (n_cells,):
            raise ValueError("need one reference value per cell")
        return self._law(theta).abs_power_moments(int(n_cells), a, p)


class SlicedUniformDisk(ProjectedTarget):
    """Disk measure whose every 1D projection is uniform on [-r, r]."""

    kind = "sliced_uniform_disk"

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.dim = 2
        self.radius = float(radius)
        self._cached = _UniformLaw(-self.radius, self.radius)

    def _law(self, theta):
        return self._cached

    def density_bound(self):
        return 1.0 / (2.0 * self.radius)


class IsotropicGaussian(ProjectedTarget):
    """Centered isotropic Gaussian N(0, sigma^2 I_d)."""

    kind = "isotropic_gaussian"

    def __init__(self, dim=2, sigma=1.0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self.sigma = float(sigma)
        self._cached = _GaussLaw(self.sigma)

    def _law(self, theta):
        return self._cached

    def density_bound(self):
        return 1.0 / (self.sigma * np.sqrt(2.0 * np.pi))


class EmpiricalCloud(ProjectedTarget):
    """Weighted atomic measure on M support points in R^d."""

    kind = "empirical"

    def __init__(self, points, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = len(points)
        if m < 1:
            raise ValueError("need at least one support point")
        if weights is None:
            weights = np.full(m, 1.0 / m)
        else:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (m,):
                raise ValueError("weights must match the number of points")
            if np.any(weights <= 0):
                raise ValueError("weights must be positive")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1")
        self.dim = points.shape[1]
        self.points = points
        self.weights = weights

    def _law(self, theta):
        return _AtomicLaw(self.points @ theta, self.weights)

    @staticmethod
    def from_csv(path, dim=None):
        """Load support points from CSV: d coordinate columns per row,
        plus an optional trailing weight column when dim is given."""
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if dim is None:
            return EmpiricalCloud(data)
        if data.shape[1] == dim:
            return EmpiricalCloud(data)
        if data.shape[1] == dim + 1:
            w = data[:, dim]
            return EmpiricalCloud(data[:, :dim], w / w.sum())
        raise ValueError(f"expected {dim} or {dim + 1} columns, got {data.shape[1]}")


class LineSegmentUniform(ProjectedTarget):
    """Uniform measure on the segment from p to q."""

    kind = "line_segment_uniform"

    def __init__(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ValueError("endpoints must be vectors of equal length")
        self.dim = len(p)
        self.p = p
        self.q = q

    def _law(self, theta):
        return _UniformLaw(float(self.p @ theta), float(self.q @ theta))


def shell_cloud(r_in, r_out, n_points, seed):
    """Uniform sample from the annulus r_in <= |x| <= r_out in the plane.

    Rejection sampling from the bounding square; deterministic for a
    fixed seed.
    """
    if not 0 <= r_in < r_out:
        raise ValueError("need 0 <= r_in < r_out")
    rng = np.random.default_rng(seed)
    out = np.empty((n_points, 2))
    have = 0
    while have < n_points:
        cand = rng.uniform(-r_out, r_out, size=(2 * (n_points - have) + 16, 2))
        r2 = np.einsum("ij,ij->i", cand, cand)
        good = cand[(r2 >= r_in ** 2) & (r2 <= r_out ** 2)]
        take = min(len(good), n_points - have)
        out[have:have + take] = good[:take]
        have += take
    return out
