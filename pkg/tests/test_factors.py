import math

import numpy as np
import pytest

from conftest import random_twist
from fgcalib import lie
from fgcalib.errors import AngleNearPi
from fgcalib.factors import (
    L,
    PriorFactor,
    RelativePoseFactor,
    VariableKey,
    X,
    batch_prior,
    batch_relative,
    linearize_prior,
    linearize_relative,
    numerical_jacobian,
    relative_error,
    residual_prior,
    residual_relative,
    sqrt_information,
)
from fgcalib.lie import Pose
from fgcalib.selfcheck import random_pose, random_sqrt_info


def test_keys():
    assert str(X(0)) == "X0" and str(L(12)) == "L12"
    assert X(3) < L(0)
    assert len({X(1), X(1), L(1)}) == 2
    with pytest.raises(ValueError):
        VariableKey(0, -1)


def test_sqrt_information(rng):
    for _ in range(20):
        A = rng.normal(size=(6, 6))
        cov = A @ A.T + 0.1 * np.eye(6)
        R = sqrt_information(cov)
        assert np.allclose(np.tril(R, -1), 0.0)
        assert np.allclose(R.T @ R, np.linalg.inv(cov), rtol=0, atol=1e-9 * np.abs(np.linalg.inv(cov)).max())
    d = np.array([1e-4, 2e-4, 3e-4, 1e-6, 2e-6, 3e-6])
    assert np.allclose(sqrt_information(np.diag(d)), np.diag(1 / np.sqrt(d)))
    with pytest.raises(ValueError):
        sqrt_information(np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        sqrt_information(np.eye(5))


def test_prior_residual_examples(rng):
    m = random_pose(rng)
    f = PriorFactor(L(0), m, np.eye(6))
    assert np.allclose(residual_prior(f, m), 0.0, atol=1e-15)
    for _ in range(50):
        delta = random_twist(rng)
        delta *= rng.uniform(0.001, 0.1) / np.linalg.norm(delta)
        r = residual_prior(f, lie.retract(m, delta))
        assert np.linalg.norm(r - delta) <= 0.01 * np.linalg.norm(delta) ** 2
        f2 = PriorFactor(L(0), m, 2 * np.eye(6))
        assert np.allclose(residual_prior(f2, lie.retract(m, delta)), 2 * r, atol=1e-15)


def test_relative_residual_examples(rng):
    cam, z = random_pose(rng), random_pose(rng)
    f = RelativePoseFactor(X(0), L(0), z, np.eye(6))
    assert np.allclose(residual_relative(f, cam, cam @ z), 0.0, atol=1e-12)
    for _ in range(50):
        delta = random_twist(rng)
        delta *= rng.uniform(0.001, 0.1) / np.linalg.norm(delta)
        r = residual_relative(f, Pose(), lie.retract(z, delta))
        assert np.linalg.norm(r - delta) <= 0.01 * np.linalg.norm(delta) ** 2


def test_relative_factor_key_kinds():
    with pytest.raises(ValueError):
        RelativePoseFactor(L(0), X(0), Pose(), np.eye(6))
    with pytest.raises(ValueError):
        RelativePoseFactor(X(0), X(1), Pose(), np.eye(6))


def test_prior_jacobian_finite_differences_100_points():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        f = PriorFactor(L(0), random_pose(rng), random_sqrt_info(rng))
        x = lie.retract(f.measured, random_twist(rng, max_angle=2.0))
        r, J = linearize_prior(f, x)
        assert np.allclose(r, residual_prior(f, x))
        worst = max(worst, relative_error(J, numerical_jacobian(lambda p: residual_prior(f, p), x)))
    assert worst <= 1e-5


def test_relative_jacobians_finite_differences_100_points():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        cam, mark = random_pose(rng), random_pose(rng)
        z = lie.retract(lie.inverse(cam) @ mark, random_twist(rng, max_angle=2.0))
        f = RelativePoseFactor(X(0), L(0), z, random_sqrt_info(rng))
        r, Jc, Jl = linearize_relative(f, cam, mark)
        assert np.allclose(r, residual_relative(f, cam, mark))
        worst = max(
            worst,
            relative_error(Jc, numerical_jacobian(lambda p: residual_relative(f, p, mark), cam)),
            relative_error(Jl, numerical_jacobian(lambda p: residual_relative(f, cam, p), mark)),
        )
    assert worst <= 1e-5


def test_batch_evaluation_matches_scalar(rng):
    priors, rels = [], []
    for _ in range(30):
        priors.append((PriorFactor(L(0), random_pose(rng), random_sqrt_info(rng)), random_pose(rng)))
        cam, mark = random_pose(rng), random_pose(rng)
        z = lie.retract(lie.inverse(cam) @ mark, random_twist(rng, max_angle=1.0))
        rels.append((RelativePoseFactor(X(0), L(0), z, random_sqrt_info(rng)), cam, mark))
    stack = lambda ps: (np.array([p.q for p in ps]), np.array([p.translation for p in ps]))
    mq, mt = stack([f.measured for f, _ in priors])
    xq, xt = stack([x for _, x in priors])
    ok = [(lie.inverse(f.measured) @ x).rotation.angle < math.pi - 1e-3 for f, x in priors]
    idx = np.flatnonzero(ok)
    r, J = batch_prior(mq[idx], mt[idx], np.array([priors[i][0].sqrt_info for i in idx]), xq[idx], xt[idx])
    for k, i in enumerate(idx):
        rr, JJ = linearize_prior(*priors[i])
        assert np.allclose(r[k], rr, atol=1e-12) and np.allclose(J[k], JJ, atol=1e-12)
    mq, mt = stack([f.measured for f, _, _ in rels])
    cq, ct = stack([c for _, c, _ in rels])
    lq, lt = stack([m for _, _, m in rels])
    S = np.array([f.sqrt_info for f, _, _ in rels])
    r, Jc, Jl = batch_relative(mq, mt, S, cq, ct, lq, lt)
    for k, (f, c, m) in enumerate(rels):
        rr, JJc, JJl = linearize_relative(f, c, m)
        assert np.allclose(r[k], rr, atol=1e-12)
        assert np.allclose(Jc[k], JJc, atol=1e-10) and np.allclose(Jl[k], JJl, atol=1e-10)


def test_batch_reports_offending_factor():
    good = Pose()
    bad = lie.rot_z(math.pi)
    mq = np.array([good.q, good.q])
    mt = np.zeros((2, 3))
    xq = np.array([good.q, bad.q])
    with pytest.raises(AngleNearPi) as info:
        batch_prior(mq, mt, np.array([np.eye(6)] * 2), xq, mt, labels=["L0 prior", "L1 prior"])
    assert info.value.key == "L1 prior"
    assert "L1 prior" in str(info.value)


def test_relative_error_guard():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([np.nan]), np.ones(1)) == math.inf
