import json

import numpy as np
import pytest

from swflow import (EmpiricalCloud, IsotropicGaussian, OnDiagonal, PointCloud,
                    SlicedEvaluator, SlicedUniformDisk, energy, equispaced_circle,
                    estimator_fl, grad_general_p, grad_p2)


def test_energy_origin_vs_disk():
    X = PointCloud(np.zeros((1, 2)))
    disk = SlicedUniformDisk()
    for dirs in (equispaced_circle(7, 0.1), equispaced_circle(64, 0.0)):
        assert abs(energy(X, disk, dirs) - 1.0 / 6.0) < 1e-14


def test_energy_refinement_decreases():
    disk = SlicedUniformDisk()
    dirs = equispaced_circle(64, 0.0)
    one = energy(PointCloud(np.zeros((1, 2))), disk, dirs)
    pair = energy(PointCloud(np.array([[-0.5, 0.0], [0.5, 0.0]])), disk, dirs)
    assert pair < one


def test_energy_zero_on_matching_support():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(9, 2))
    target = EmpiricalCloud(pts)
    dirs = equispaced_circle(32, 0.123)
    assert abs(energy(PointCloud(pts), target, dirs)) < 1e-14


def test_grad_zero_at_center_of_gaussian():
    rep = grad_p2(PointCloud(np.zeros((1, 2))), IsotropicGaussian(),
                  equispaced_circle(16, 0.2))
    assert np.max(np.abs(rep.grads)) < 1e-14


def test_residuals_are_exactly_n_times_grads():
    rng = np.random.default_rng(0)
    X = PointCloud(rng.normal(size=(13, 2)))
    rep = grad_p2(X, SlicedUniformDisk(), equispaced_circle(20, 0.4))
    assert np.array_equal(rep.residuals, 13 * rep.grads)
    assert abs(rep.grad_norm ** 2 - np.sum(rep.grads ** 2)) < 1e-18


def test_grad_p2_finite_difference():
    rng = np.random.default_rng(9)
    disk = SlicedUniformDisk()
    dirs = equispaced_circle(24, 0.05)
    X = rng.uniform(-1, 1, size=(8, 2))
    ev = SlicedEvaluator(disk, dirs, 8)
    g = ev.grad_p2(X).grads
    h = 1e-5
    for i in range(8):
        for j in range(2):
            xp = X.copy()
            xp[i, j] += h
            xm = X.copy()
            xm[i, j] -= h
            fd = (ev.energy(xp) - ev.energy(xm)) / (2 * h)
            assert abs(fd - g[i, j]) <= 1e-5 * max(abs(g[i, j]), 1e-8)


def test_grad_general_p_matches_p2():
    rng = np.random.default_rng(4)
    X = PointCloud(rng.uniform(-0.8, 0.8, size=(7, 2)))
    dirs = equispaced_circle(16, 0.3)
    for target in (SlicedUniformDisk(), IsotropicGaussian()):
        a = grad_p2(X, target, dirs).grads
        b = grad_general_p(X, target, dirs, 2).grads
        assert np.max(np.abs(a - b)) < 1e-9


def test_grad_general_p_rejects_small_p():
    X = PointCloud(np.array([[0.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        grad_general_p(X, SlicedUniformDisk(), equispaced_circle(4, 0.1), 1.5)


def test_grad_p4_antisymmetric_pair():
    X = PointCloud(np.array([[-0.6, 0.0], [0.6, 0.0]]))
    dirs = equispaced_circle(12, 0.21)
    rep = grad_general_p(X, SlicedUniformDisk(), dirs, 4)
    assert np.max(np.abs(rep.grads[0] + rep.grads[1])) < 1e-10
    assert rep.residuals is None


def test_on_diagonal_raises():
    X = PointCloud(np.array([[0.3, 0.4], [0.3, 0.4], [1.0, 0.0]]))
    with pytest.raises(OnDiagonal):
        grad_p2(X, SlicedUniformDisk(), equispaced_circle(8, 0.0))
    assert not X.is_off_diagonal()


def test_quadrature_convergence():
    rng = np.random.default_rng(11)
    X = PointCloud(rng.uniform(-1, 1, size=(10, 2)))
    disk = SlicedUniformDisk()
    gaps = []
    for L in (25, 100, 400):
        a = energy(X, disk, equispaced_circle(L, 0.0))
        b = energy(X, disk, equispaced_circle(4 * L, 0.0))
        gaps.append(abs(a - b))
    assert gaps[0] > gaps[1] > gaps[2]


def test_rotation_equivariance():
    rng = np.random.default_rng(13)
    pts = rng.uniform(-0.7, 0.7, size=(9, 2))
    disk = SlicedUniformDisk()
    angle = 0.813
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    dirs = equispaced_circle(200, 0.0)
    a = energy(PointCloud(pts), disk, dirs)
    # rotating the direction phase along with the cloud is exact
    b = energy(PointCloud(pts @ rot.T), disk, equispaced_circle(200, angle))
    assert abs(a - b) < 1e-12
    # with the unrotated grid only quadrature error remains
    c = energy(PointCloud(pts @ rot.T), disk, dirs)
    assert abs(a - c) < 1e-5


def test_smoothness_bound():
    # F(Y) <= F(X) + <grad F(X), Y-X> + |X-Y|^2 / (2Nd)
    rng = np.random.default_rng(21)
    disk = SlicedUniformDisk()
    dirs = equispaced_circle(32, 0.0)
    n, d = 12, 2
    ev = SlicedEvaluator(disk, dirs, n)
    for _ in range(20):
        X = rng.uniform(-1, 1, size=(n, d))
        Y = rng.uniform(-1, 1, size=(n, d))
        rep = ev.grad_p2(X)
        bound = rep.energy + np.sum(rep.grads * (Y - X)) \
            + np.sum((X - Y) ** 2) / (2 * n * d)
        assert ev.energy(Y) <= bound + 1e-9


def test_estimator_fl_equals_energy():
    rng = np.random.default_rng(6)
    X = PointCloud(rng.uniform(-1, 1, size=(5, 2)))
    disk = SlicedUniformDisk()
    dirs = equispaced_circle(10, np.pi / 2)
    assert estimator_fl(X, disk, dirs) == energy(X, disk, dirs)


def test_thread_count_does_not_change_bits():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(40, 2))
    gauss = IsotropicGaussian()
    dirs = equispaced_circle(101, 0.7)
    ev1 = SlicedEvaluator(gauss, dirs, 40, threads=1)
    ev4 = SlicedEvaluator(gauss, dirs, 40, threads=4)
    assert ev1.energy(X) == ev4.energy(X)
    r1 = ev1.grad_p2(X)
    r4 = ev4.grad_p2(X)
    assert np.array_equal(r1.grads, r4.grads)
    assert r1.energy == r4.energy
    g1 = ev1.grad_general_p(X, 3)
    g4 = ev4.grad_general_p(X, 3)
    assert np.array_equal(g1.grads, g4.grads)


def test_gradient_report_json():
    X = PointCloud(np.array([[0.1, 0.2], [0.5, -0.3]]))
    rep = grad_p2(X, SlicedUniformDisk(), equispaced_circle(8, 0.0))
    payload = json.loads(rep.to_json())
    assert set(payload) == {"energy", "grad_norm", "p", "grads", "residuals"}
    assert np.allclose(payload["residuals"], 2 * np.asarray(payload["grads"]))


def test_dimension_mismatch_rejected():
    X = PointCloud(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        energy(X, SlicedUniformDisk(), equispaced_circle(8, 0.0))
