"""Exact one-dimensional optimal transport primitives.

On the line, optimal transport between equal-size point sets is sorting,
and transport from N points to a density is the assignment of the i-th
sorted point to the i-th mass-1/N cell of the density.  Both costs are
computed here in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .targets import CellTable


@dataclass(frozen=True)
class SortPermutation:
    """Stable sorting permutation of a vector of projected values.

    perm[k] is the original index of the k-th smallest value (0-based);
    inverse[i] is the rank of original index i.  Ties keep their original
    order, which fixes the chosen matching on the generalized diagonal.
    """

    perm: np.ndarray
    inverse: np.ndarray


def sort_projection(values) -> SortPermutation:
    values = np.asarray(values, dtype=float)
    perm = np.argsort(values, kind="stable")
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(len(perm))
    return SortPermutation(perm=perm, inverse=inverse)


def wpp_discrete(x, y, p):
    """W_p^p between two uniform N-point clouds on the line.

    Equals (1/N) sum_i |x_(i) - y_(i)|^p over sorted order, the optimal
    matching cost.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1D arrays of equal length")
    if p < 1:
        raise ValueError("p must be >= 1")
    diff = np.sort(x, kind="stable") - np.sort(y, kind="stable")
    if p == 1:
        cost = np.abs(diff)
    elif p == 2:
        cost = diff * diff
    else:
        cost = np.abs(diff) ** p
    return float(np.sum(cost) / len(x))


def w2sq_semidiscrete(proj, table: CellTable):
    """W_2^2 between the uniform cloud on proj and the cell-table target.

    Expands sum_i int_{V_i} (x_(i) - x)^2 d(law) using per-cell
    barycenters b_i and second moments m_i: each cell contributes
    (x_(i)^2 - 2 x_(i) b_i + m_i)/N.
    """
    proj = np.asarray(proj, dtype=float)
    n = table.n_cells
    if proj.shape != (n,):
        raise ValueError("projection length must match the cell table")
    xs = np.sort(proj, kind="stable")
    total = np.sum(xs * xs) - 2.0 * np.dot(xs, table.barycenters) \
        + np.sum(table.second_moments)
    return float(total / n)
