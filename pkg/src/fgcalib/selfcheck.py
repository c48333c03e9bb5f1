"""Embedded invariant suite run by ``fgcalib selfcheck``.

Each check is small enough that the whole suite finishes in a few seconds.
``corrupt`` names a Jacobian (``fk``, ``prior`` or ``relative``) whose analytic
value is deliberately perturbed, so tests can confirm that a broken
derivative is caught and reported under the right check name.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import lie
from .factors import (
    L,
    PriorFactor,
    RelativePoseFactor,
    X,
    linearize_prior,
    linearize_relative,
    numerical_jacobian,
    relative_error,
    residual_prior,
    residual_relative,
)
from .kinematics import JointSpec, KinematicChain, fk_jacobian, forward_kinematics
from .pipeline import calibrate
from .sim import random_scenario, simulate
from .solver import FactorGraph, dense_solve, linearize, solve_normal_equations

CORRUPTIBLE = ("fk", "prior", "relative")
JACOBIAN_TOL = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def random_pose(rng: np.random.Generator, max_angle: float = 2.5, scale: float = 1.0) -> lie.Pose:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    omega = axis * rng.uniform(0.0, max_angle)
    return lie.Pose(lie.Rotation.from_rotvec(omega), rng.normal(scale=scale, size=3))


def random_chain(rng: np.random.Generator, n_joints: int | None = None) -> KinematicChain:
    n = int(rng.integers(1, 7)) if n_joints is None else n_joints
    joints = []
    for j in range(n):
        axis = rng.normal(size=3)
        joints.append(JointSpec(f"j{j}", axis / np.linalg.norm(axis), random_pose(rng, scale=0.3)))
    return KinematicChain(tuple(joints), random_pose(rng, scale=0.3), rng.uniform(0.001, 0.05, n), rng.uniform(0.0, 0.01, 6))


def random_sqrt_info(rng: np.random.Generator) -> np.ndarray:
    A = rng.normal(size=(6, 6))
    return np.linalg.cholesky(A @ A.T + 6.0 * np.eye(6)).T


def random_graph(rng: np.random.Generator, n_cameras: int, n_landmarks: int, noise: float = 0.05):
    """Random consistent-ish graph: every landmark has a prior, every camera >= 2 views."""
    cams = [random_pose(rng) for _ in range(n_cameras)]
    marks = [random_pose(rng) for _ in range(n_landmarks)]
    graph = FactorGraph()
    initial = {}
    for i, c in enumerate(cams):
        initial[X(i)] = lie.retract(c, rng.normal(scale=noise, size=6))
    for j, m in enumerate(marks):
        graph.add(PriorFactor(L(j), lie.retract(m, rng.normal(scale=noise, size=6)), random_sqrt_info(rng)))
        initial[L(j)] = lie.retract(m, rng.normal(scale=noise, size=6))
    for i, c in enumerate(cams):
        seen = set(rng.choice(n_landmarks, size=min(2, n_landmarks), replace=False).tolist())
        seen |= {j for j in range(n_landmarks) if rng.random() < 0.5}
        for j in sorted(seen):
            z = lie.retract(lie.inverse(c) @ marks[j], rng.normal(scale=noise, size=6))
            graph.add(RelativePoseFactor(X(i), L(j), z, random_sqrt_info(rng)))
    return graph, initial


def _corrupted(J: np.ndarray, active: bool) -> np.ndarray:
    if not active:
        return J
    J = J.copy()
    J[0, 0] += 0.1 * max(1.0, abs(J[0, 0]))
    return J


def check_exp_log(rng, corrupt) -> str:
    worst = 0.0
    for _ in range(200):
        axis = rng.normal(size=3)
        xi = np.concatenate([axis / np.linalg.norm(axis) * rng.uniform(0.0, 3.0), rng.normal(size=3)])
        worst = max(worst, float(np.max(np.abs(lie.log(lie.exp(xi)) - xi))))
    if worst > 1e-9:
        raise AssertionError(f"log(exp(xi)) error {worst:.3g} > 1e-9")
    return f"max error {worst:.2e}"


def check_fk_jacobian(rng, corrupt) -> str:
    worst = 0.0
    for _ in range(25):
        chain = random_chain(rng)
        q = rng.uniform(-np.pi, np.pi, chain.dof)
        fk0 = forward_kinematics(chain, q)
        J = _corrupted(fk_jacobian(chain, q), corrupt == "fk")
        h = 1e-6
        cols = []
        for j in range(chain.dof):
            dq = np.zeros(chain.dof)
            dq[j] = h
            plus = lie.local_coordinates(fk0, forward_kinematics(chain, q + dq))
            minus = lie.local_coordinates(fk0, forward_kinematics(chain, q - dq))
            cols.append((plus - minus) / (2 * h))
        worst = max(worst, relative_error(J, np.stack(cols, axis=1)))
    if worst > JACOBIAN_TOL:
        raise AssertionError(f"relative error {worst:.3g} > {JACOBIAN_TOL}")
    return f"max relative error {worst:.2e}"


def check_prior_jacobian(rng, corrupt) -> str:
    worst = 0.0
    for _ in range(25):
        f = PriorFactor(L(0), random_pose(rng), random_sqrt_info(rng))
        x = lie.retract(f.measured, rng.normal(scale=0.5, size=6))
        _, J = linearize_prior(f, x)
        J = _corrupted(J, corrupt == "prior")
        worst = max(worst, relative_error(J, numerical_jacobian(lambda p: residual_prior(f, p), x)))
    if worst > JACOBIAN_TOL:
        raise AssertionError(f"relative error {worst:.3g} > {JACOBIAN_TOL}")
    return f"max relative error {worst:.2e}"


def check_relative_jacobian(rng, corrupt) -> str:
    worst = 0.0
    for _ in range(25):
        cam, mark = random_pose(rng), random_pose(rng)
        z = lie.retract(lie.inverse(cam) @ mark, rng.normal(scale=0.5, size=6))
        f = RelativePoseFactor(X(0), L(0), z, random_sqrt_info(rng))
        _, Jc, Jl = linearize_relative(f, cam, mark)
        Jc = _corrupted(Jc, corrupt == "relative")
        num_c = numerical_jacobian(lambda p: residual_relative(f, p, mark), cam)
        num_l = numerical_jacobian(lambda p: residual_relative(f, cam, p), mark)
        worst = max(worst, relative_error(Jc, num_c), relative_error(Jl, num_l))
    if worst > JACOBIAN_TOL:
        raise AssertionError(f"relative error {worst:.3g} > {JACOBIAN_TOL}")
    return f"max relative error {worst:.2e}"


def check_schur_vs_dense(rng, corrupt) -> str:
    worst = 0.0
    for _ in range(10):
        graph, initial = random_graph(rng, int(rng.integers(1, 4)), int(rng.integers(1, 15)))
        system = linearize(graph, initial)
        a = solve_normal_equations(system)
        b = dense_solve(system)
        worst = max(worst, max(float(np.max(np.abs(a[k] - b[k]))) for k in a))
    if worst > 1e-8:
        raise AssertionError(f"Schur and dense solves differ by {worst:.3g}")
    return f"max difference {worst:.2e}"


def check_noiseless_pipeline(rng, corrupt) -> str:
    worst = 0.0
    for m in (1, 2, 3):
        data = simulate(random_scenario(rng, m, 20))
        result = calibrate(data.problem())
        for cam in data.cameras:
            angle, trans = lie.pose_distance(result.extrinsics[cam], data.ground_truth[cam])
            worst = max(worst, angle, trans)
        if result.report.final_cost > 1e-16:
            raise AssertionError(f"final cost {result.report.final_cost:.3g} > 1e-16")
    if worst > 1e-7:
        raise AssertionError(f"extrinsic error {worst:.3g} > 1e-7")
    return f"max extrinsic error {worst:.2e}"


CHECKS: list[tuple[str, Callable]] = [
    ("exp_log_roundtrip", check_exp_log),
    ("fk_jacobian", check_fk_jacobian),
    ("prior_jacobian", check_prior_jacobian),
    ("relative_jacobian", check_relative_jacobian),
    ("schur_vs_dense", check_schur_vs_dense),
    ("noiseless_pipeline", check_noiseless_pipeline),
]


def run_checks(seed: int = 0, corrupt: str | None = None) -> list[CheckResult]:
    if corrupt is not None and corrupt not in CORRUPTIBLE:
        raise ValueError(f"corrupt must be one of {CORRUPTIBLE}")
    results = []
    for k, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, k])
        start = time.perf_counter()
        try:
            detail, passed = fn(rng, corrupt), True
        except AssertionError as exc:
            detail, passed = str(exc), False
        results.append(CheckResult(name, passed, detail, time.perf_counter() - start))
    return results
