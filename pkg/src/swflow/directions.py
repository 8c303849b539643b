"""Direction sets on the unit sphere with quadrature weights.

A :class:`DirectionSet` is a finite, weighted family of unit vectors that
stands in for the uniform probability measure on the sphere in every
downstream integral.  In the plane we use an equispaced angular grid
(trapezoid rule, exact for trigonometric polynomials); in higher
dimension we fall back to seeded Monte Carlo.  Directions are stored in a
fixed index order and all reductions downstream sum in that order, so
results do not depend on how the work is scheduled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

#: Tolerance on unit norms and on the total quadrature weight.
NORM_TOL = 1e-12

#: Components smaller than this (in absolute value) produced by cos/sin of
#: angles that are exact multiples of pi/2 are rounded to zero, so that axis
#: directions like (0, 1) appear exactly in equispaced grids.
_SNAP_TOL = 1e-12


@dataclass(frozen=True)
class DirectionSet:
    """L weighted unit directions in R^d.

    Attributes
    ----------
    dim : int
        Ambient dimension d >= 2.
    dirs : ndarray, shape (L, d)
        Unit vectors, one per row.
    weights : ndarray, shape (L,)
        Nonnegative quadrature weights summing to 1.
    meta : dict
        Construction record (phase or seed), kept for serialization.
    """

    dim: int
    dirs: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dirs = np.asarray(self.dirs, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if dirs.ndim != 2 or dirs.shape[1] != self.dim:
            raise ValueError(f"dirs must have shape (L, {self.dim})")
        if len(dirs) < 1:
            raise ValueError("a DirectionSet needs at least one direction")
        if weights.shape != (len(dirs),):
            raise ValueError("weights must match the number of directions")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ValueError("directions must be unit vectors")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > NORM_TOL:
            raise ValueError("weights must sum to 1")
        dirs.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "dirs", dirs)
        object.__setattr__(self, "weights", weights)

    @property
    def n_directions(self) -> int:
        return len(self.dirs)

    def second_moment(self) -> np.ndarray:
        """Quadrature second-moment matrix sum_l w_l theta_l theta_l^T.

        Converges to I_d / d; exact (to roundoff) for equispaced grids in
        the plane with L >= 3.
        """
        return np.einsum("l,li,lj->ij", self.weights, self.dirs, self.dirs)

    def to_json(self) -> str:
        payload = {
            "dim": self.dim,
            **self.meta,
            "dirs": self.dirs.tolist(),
            "weights": self.weights.tolist(),
        }
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "DirectionSet":
        payload = json.loads(text)
        dim = payload.pop("dim")
        dirs = np.asarray(payload.pop("dirs"), dtype=float)
        weights = np.asarray(payload.pop("weights"), dtype=float)
        return DirectionSet(dim=dim, dirs=dirs, weights=weights, meta=payload)


def equispaced_circle(n_directions: int, phase: float = 0.0) -> DirectionSet:
    """Equispaced angular grid on the unit circle with uniform weights.

    Directions sit at angles ``phase + 2*pi*k/L`` for k = 0..L-1.  With
    ``phase = pi/2`` the grid contains (0, 1) exactly; with
    ``phase = pi/2 + pi/L`` it avoids it.
    """
    if n_directions < 1:
        raise ValueError("n_directions must be >= 1")
    angles = phase + 2.0 * np.pi * np.arange(n_directions) / n_directions
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    # cos(pi/2) evaluates to ~6e-17; snap so axis directions are exact.
    dirs[np.abs(dirs) < _SNAP_TOL] = 0.0
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    weights = np.full(n_directions, 1.0 / n_directions)
    return DirectionSet(dim=2, dirs=dirs, weights=weights, meta={"phase": phase})


def sampled_sphere(dim: int, n_directions: int, seed: int) -> DirectionSet:
    """Seeded i.i.d. uniform directions on S^{d-1} with uniform weights.

    The same seed always yields the bit-identical set (normalized
    Gaussian vectors from a PCG64 generator).
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if n_directions < 1:
        raise ValueError("n_directions must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_directions, dim))
    dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    weights = np.full(n_directions, 1.0 / n_directions)
    return DirectionSet(dim=dim, dirs=dirs, weights=weights, meta={"seed": seed})
