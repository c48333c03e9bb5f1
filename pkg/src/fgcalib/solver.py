"""Nonlinear least squares over pose variables.

The graph holds camera extrinsics and marker landmarks.  Each Gauss-Newton
step linearizes every factor at once, eliminates the landmark blocks with a
Schur complement, solves the small dense camera system by Cholesky and
back-substitutes the landmark updates.
"""

from __future__ import annotations

import enum
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg

from . import lie
from .errors import IndefiniteSystem
from .factors import Kind, PriorFactor, RelativePoseFactor, VariableKey, batch_prior, batch_relative
from .lie import Pose

log = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    ABS_COST = "abs_cost"
    REL_COST = "rel_cost"
    MAX_ITERATIONS = "max_iterations"
    LAMBDA_LIMIT = "lambda_limit"


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 50
    abs_cost_tol: float = 1e-12
    rel_cost_tol: float = 1e-9
    initial_lambda: float = 0.0
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    max_lambda: float = 1e12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.abs_cost_tol > 0 and self.rel_cost_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.initial_lambda < 0:
            raise ValueError("initial_lambda must be >= 0")
        if self.initial_lambda > 0 and not (self.lambda_up > 1.0 and 0.0 < self.lambda_down < 1.0):
            raise ValueError("need lambda_up > 1 and 0 < lambda_down < 1")


@dataclass
class SolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    converged: bool
    termination: Termination
    cost_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "converged": self.converged,
            "termination": self.termination.value,
        }


class FactorGraph:
    """Container of prior and relative-pose factors (single writer)."""

    def __init__(self, factors: Iterable = ()):
        self.priors: list[PriorFactor] = []
        self.relatives: list[RelativePoseFactor] = []
        for f in factors:
            self.add(f)

    def add(self, factor) -> None:
        if isinstance(factor, PriorFactor):
            self.priors.append(factor)
        elif isinstance(factor, RelativePoseFactor):
            self.relatives.append(factor)
        else:
            raise TypeError(f"unsupported factor type {type(factor).__name__}")

    @property
    def factors(self) -> list:
        return [*self.priors, *self.relatives]

    def keys(self) -> set[VariableKey]:
        out = {f.target for f in self.priors}
        for f in self.relatives:
            out.add(f.source)
            out.add(f.target)
        return out

    def __len__(self):
        return len(self.priors) + len(self.relatives)


class _Index:
    """Flattened, array-backed view of a graph for a fixed variable set."""

    def __init__(self, graph: FactorGraph, keys: Iterable[VariableKey]):
        keys = sorted(set(keys))
        missing = graph.keys().difference(keys)
        if missing:
            raise KeyError(f"no estimate for variables {sorted(map(str, missing))}")
        self.cameras = [k for k in keys if k.kind is Kind.CAMERA]
        self.landmarks = [k for k in keys if k.kind is Kind.LANDMARK]
        self.keys = self.cameras + self.landmarks
        self.slot = {k: i for i, k in enumerate(self.keys)}
        self.M = len(self.cameras)
        self.N = len(self.landmarks)

        def stack(factors):
            if not factors:
                return np.zeros((0, 4)), np.zeros((0, 3)), np.zeros((0, 6, 6))
            return (
                np.array([f.measured.q for f in factors]),
                np.array([f.measured.translation for f in factors]),
                np.array([f.sqrt_info for f in factors], dtype=float),
            )

        self.prior_slot = np.array([self.slot[f.target] for f in graph.priors], dtype=int)
        self.prior_mq, self.prior_mt, self.prior_S = stack(graph.priors)
        self.prior_labels = [str(f.target) for f in graph.priors]
        self.rel_cam = np.array([self.slot[f.source] for f in graph.relatives], dtype=int)
        self.rel_lm = np.array([self.slot[f.target] - self.M for f in graph.relatives], dtype=int)
        self.rel_mq, self.rel_mt, self.rel_S = stack(graph.relatives)
        self.rel_labels = [f"{f.source}-{f.target}" for f in graph.relatives]

        touched = set(self.prior_slot.tolist()) | set(self.rel_cam.tolist()) | set((self.rel_lm + self.M).tolist())
        self.untouched = [self.keys[i] for i in range(len(self.keys)) if i not in touched]

    def state(self, estimates: Mapping[VariableKey, Pose]) -> tuple[np.ndarray, np.ndarray]:
        Q = np.array([estimates[k].q for k in self.keys]).reshape(-1, 4)
        T = np.array([estimates[k].translation for k in self.keys]).reshape(-1, 3)
        return Q, T

    def residuals(self, Q, T) -> np.ndarray:
        parts = []
        if len(self.prior_slot):
            s = self.prior_slot
            parts.append(batch_prior(self.prior_mq, self.prior_mt, self.prior_S, Q[s], T[s], self.prior_labels, jacobians=False))
        if len(self.rel_cam):
            c, l = self.rel_cam, self.rel_lm + self.M
            parts.append(
                batch_relative(self.rel_mq, self.rel_mt, self.rel_S, Q[c], T[c], Q[l], T[l], self.rel_labels, jacobians=False)
            )
        return np.concatenate(parts) if parts else np.zeros((0, 6))

    def cost(self, Q, T) -> float:
        r = self.residuals(Q, T)
        return float(np.sum(r * r))


@dataclass
class LinearSystem:
    """Whitened Jacobian rows and residuals of every factor at one linearization point.

    Rows are ordered priors first, then relative factors; columns follow
    ``keys`` (cameras, then landmarks), six per variable.
    """

    keys: list[VariableKey]
    n_cameras: int
    prior_slot: np.ndarray
    prior_J: np.ndarray
    prior_r: np.ndarray
    rel_cam: np.ndarray
    rel_lm: np.ndarray
    rel_Jc: np.ndarray
    rel_Jl: np.ndarray
    rel_r: np.ndarray

    @property
    def n_landmarks(self) -> int:
        return len(self.keys) - self.n_cameras

    def cost(self) -> float:
        return float(np.sum(self.prior_r**2) + np.sum(self.rel_r**2))

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Full ``(A, b)`` with cost ``||b||^2`` and model ``||A d + b||^2``."""
        n_rows = 6 * (len(self.prior_slot) + len(self.rel_cam))
        A = np.zeros((n_rows, 6 * len(self.keys)))
        b = np.concatenate([self.prior_r.reshape(-1), self.rel_r.reshape(-1)])
        row = 0
        for s, J in zip(self.prior_slot, self.prior_J):
            A[row : row + 6, 6 * s : 6 * s + 6] = J
            row += 6
        M = self.n_cameras
        for c, l, Jc, Jl in zip(self.rel_cam, self.rel_lm, self.rel_Jc, self.rel_Jl):
            A[row : row + 6, 6 * c : 6 * c + 6] = Jc
            s = M + l
            A[row : row + 6, 6 * s : 6 * s + 6] = Jl
            row += 6
        return A, b

    def normal_blocks(self):
        """Block normal equations ``H = A^T A`` and gradient ``g = A^T b``.

        Returns ``(Hcc, Hll, W, gc, gl)`` where ``Hcc`` is ``(6M, 6M)``,
        ``Hll`` is ``(N, 6, 6)``, ``W[l, c] = A_l^T A_c`` is ``(N, M, 6, 6)``.
        """
        M, N = self.n_cameras, self.n_landmarks
        Hcc = np.zeros((M, M, 6, 6))
        Hll = np.zeros((N, 6, 6))
        W = np.zeros((N, M, 6, 6))
        gc = np.zeros((M, 6))
        gl = np.zeros((N, 6))

        JtJ = np.einsum("kji,kjl->kil", self.prior_J, self.prior_J)
        Jtr = np.einsum("kji,kj->ki", self.prior_J, self.prior_r)
        on_cam = self.prior_slot < M
        cs = self.prior_slot[on_cam]
        np.add.at(Hcc, (cs, cs), JtJ[on_cam])
        np.add.at(gc, cs, Jtr[on_cam])
        ls = self.prior_slot[~on_cam] - M
        np.add.at(Hll, ls, JtJ[~on_cam])
        np.add.at(gl, ls, Jtr[~on_cam])

        if len(self.rel_cam):
            c, l = self.rel_cam, self.rel_lm
            Jc, Jl, r = self.rel_Jc, self.rel_Jl, self.rel_r
            np.add.at(Hcc, (c, c), np.einsum("kji,kjl->kil", Jc, Jc))
            np.add.at(Hll, l, np.einsum("kji,kjl->kil", Jl, Jl))
            np.add.at(W, (l, c), np.einsum("kji,kjl->kil", Jl, Jc))
            np.add.at(gc, c, np.einsum("kji,kj->ki", Jc, r))
            np.add.at(gl, l, np.einsum("kji,kj->ki", Jl, r))
        return Hcc.transpose(0, 2, 1, 3).reshape(6 * M, 6 * M), Hll, W, gc, gl

    def write_triplets(self, directory: str | os.PathLike, stem: str = "system") -> None:
        """Dump ``A`` and ``b`` as MatrixMarket coordinate text files."""
        A, b = self.dense()
        os.makedirs(directory, exist_ok=True)
        rows, cols = np.nonzero(A)
        with open(os.path.join(directory, f"{stem}_A.mtx"), "w") as fh:
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write("% columns: " + " ".join(str(k) for k in self.keys) + "\n")
            fh.write(f"{A.shape[0]} {A.shape[1]} {len(rows)}\n")
            for i, j in zip(rows, cols):
                fh.write(f"{i + 1} {j + 1} {float(A[i, j])!r}\n")
        with open(os.path.join(directory, f"{stem}_b.mtx"), "w") as fh:
            fh.write("%%MatrixMarket matrix array real general\n")
            fh.write(f"{b.size} 1\n")
            for v in b:
                fh.write(f"{float(v)!r}\n")


def _linearize_index(index: _Index, Q: np.ndarray, T: np.ndarray) -> LinearSystem:
    M = index.M
    if len(index.prior_slot):
        s = index.prior_slot
        pr, pJ = batch_prior(index.prior_mq, index.prior_mt, index.prior_S, Q[s], T[s], index.prior_labels)
    else:
        pr, pJ = np.zeros((0, 6)), np.zeros((0, 6, 6))
    if len(index.rel_cam):
        c, l = index.rel_cam, index.rel_lm + M
        rr, Jc, Jl = batch_relative(index.rel_mq, index.rel_mt, index.rel_S, Q[c], T[c], Q[l], T[l], index.rel_labels)
    else:
        rr, Jc, Jl = np.zeros((0, 6)), np.zeros((0, 6, 6)), np.zeros((0, 6, 6))
    return LinearSystem(index.keys, M, index.prior_slot, pJ, pr, index.rel_cam, index.rel_lm, Jc, Jl, rr)


def linearize(graph: FactorGraph, estimates: Mapping[VariableKey, Pose]) -> LinearSystem:
    index = _Index(graph, estimates.keys())
    return _linearize_index(index, *index.state(estimates))


def _check_observed(system: LinearSystem, untouched: list[VariableKey]) -> None:
    if untouched:
        names = ", ".join(str(k) for k in untouched)
        raise IndefiniteSystem(f"variables without any factor: {names}", untouched)


def _schur_parts(system: LinearSystem, lam: float):
    Hcc, Hll, W, gc, gl = system.normal_blocks()
    M, N = system.n_cameras, system.n_landmarks
    if lam:
        Hcc = Hcc + lam * np.eye(6 * M)
        Hll = Hll + lam * np.eye(6)
    try:
        Lll = np.linalg.cholesky(Hll)
    except np.linalg.LinAlgError:
        bad = [system.keys[M + i] for i in range(N) if np.linalg.eigvalsh(Hll[i])[0] <= 0]
        raise IndefiniteSystem("landmark block not positive definite: " + ", ".join(map(str, bad)), bad) from None
    eye = np.broadcast_to(np.eye(6), Hll.shape)
    Linv = np.linalg.solve(Lll, eye)
    Hll_inv = np.einsum("nji,njk->nik", Linv, Linv)
    # Wf[l] is the (6, 6M) coupling row block of landmark l
    Wf = W.transpose(0, 2, 1, 3).reshape(N, 6, 6 * M)
    HinvW = Hll_inv @ Wf
    S = Hcc - np.einsum("nji,njk->ik", Wf, HinvW)
    return S, Hll_inv, Wf, HinvW, gc.reshape(-1), gl


def _cholesky_reduced(S: np.ndarray, keys: list[VariableKey]):
    M = S.shape[0] // 6
    try:
        return scipy.linalg.cho_factor(S, lower=True)
    except np.linalg.LinAlgError:
        weak = [keys[c] for c in range(M) if np.linalg.eigvalsh(S[6 * c : 6 * c + 6, 6 * c : 6 * c + 6])[0] <= 1e-12 * max(1.0, np.abs(S).max())]
        names = ", ".join(map(str, weak)) or "reduced camera system"
        raise IndefiniteSystem(f"camera system not positive definite ({names})", weak) from None


def solve_normal_equations(system: LinearSystem, lam: float = 0.0) -> dict[VariableKey, np.ndarray]:
    """Solve ``(A^T A + lam I) d = -A^T b`` by landmark elimination."""
    M = system.n_cameras
    S, Hll_inv, Wf, HinvW, gc, gl = _schur_parts(system, lam)
    Hinv_gl = np.einsum("nij,nj->ni", Hll_inv, gl)
    rhs = -gc + np.einsum("nji,nj->i", Wf, Hinv_gl)
    if M:
        dc = scipy.linalg.cho_solve(_cholesky_reduced(S, system.keys), rhs)
    else:
        dc = np.zeros(0)
    dl = -Hinv_gl - np.einsum("nij,j->ni", HinvW, dc)
    out = {k: dc[6 * i : 6 * i + 6] for i, k in enumerate(system.keys[:M])}
    out.update({k: dl[i] for i, k in enumerate(system.keys[M:])})
    return out


def _retract_state(Q, T, delta):
    dq, dt = lie.se3_exp_arrays(delta)
    return lie.quat_normalize(lie.quat_multiply(Q, dq)), T + lie.quat_rotate(Q, dt)


def _to_estimates(index: _Index, Q, T) -> dict[VariableKey, Pose]:
    return {k: Pose.from_arrays(Q[i], T[i]) for i, k in enumerate(index.keys)}


def optimize(
    graph: FactorGraph,
    initial: Mapping[VariableKey, Pose],
    settings: SolverSettings | None = None,
    dump_dir: str | os.PathLike | None = None,
) -> tuple[dict[VariableKey, Pose], SolveReport]:
    """Gauss-Newton (``initial_lambda == 0``) or Levenberg-Marquardt iterations.

    Stops when the cost change falls below ``abs_cost_tol`` (or the cost
    itself below ``abs_cost_tol * rel_cost_tol``), the relative decrease
    below ``rel_cost_tol``, or after ``max_iterations`` linear solves.  Raises :class:`IndefiniteSystem` on an under-constrained graph.
    """
    settings = settings or SolverSettings()
    index = _Index(graph, initial.keys())
    Q, T = index.state(initial)
    system = _linearize_index(index, Q, T)
    _check_observed(system, index.untouched)
    cost = system.cost()
    initial_cost = cost
    history = [cost]
    lam = settings.initial_lambda
    termination = Termination.MAX_ITERATIONS
    iterations = 0

    while iterations < settings.max_iterations:
        iterations += 1
        if dump_dir is not None:
            system.write_triplets(dump_dir, f"iter{iterations:03d}")
        delta = solve_normal_equations(system, lam)
        step = np.array([delta[k] for k in index.keys]).reshape(-1, 6)
        Q_new, T_new = _retract_state(Q, T, step)
        new_cost = index.cost(Q_new, T_new)

        if lam > 0 and not new_cost <= cost:
            lam *= settings.lambda_up
            log.debug("iteration %d rejected, cost %.6g -> %.6g, lambda %.3g", iterations, cost, new_cost, lam)
            if lam > settings.max_lambda:
                termination = Termination.LAMBDA_LIMIT
                break
            continue
        if lam > 0:
            lam = max(lam * settings.lambda_down, 1e-15)

        change = cost - new_cost
        Q, T, prev, cost = Q_new, T_new, cost, new_cost
        history.append(cost)
        log.debug("iteration %d cost %.12g", iterations, cost)
        # a cost below abs_tol * rel_tol is an exact fit; another step cannot improve it
        if abs(change) < settings.abs_cost_tol or cost < settings.abs_cost_tol * settings.rel_cost_tol:
            termination = Termination.ABS_COST
            break
        if change >= 0 and change < settings.rel_cost_tol * prev:
            termination = Termination.REL_COST
            break
        system = _linearize_index(index, Q, T)

    converged = termination in (Termination.ABS_COST, Termination.REL_COST) and cost <= initial_cost + settings.abs_cost_tol
    report = SolveReport(iterations, initial_cost, cost, converged, termination, history)
    return _to_estimates(index, Q, T), report


def marginal_covariances(
    graph: FactorGraph, estimates: Mapping[VariableKey, Pose], keys: Iterable[VariableKey]
) -> dict[VariableKey, np.ndarray]:
    """6x6 diagonal blocks of ``(A^T A)^-1`` at ``estimates`` for the requested keys."""
    index = _Index(graph, estimates.keys())
    system = _linearize_index(index, *index.state(estimates))
    _check_observed(system, index.untouched)
    M = index.M
    S, Hll_inv, Wf, HinvW, _, _ = _schur_parts(system, 0.0)
    if M:
        S_inv = scipy.linalg.cho_solve(_cholesky_reduced(S, system.keys), np.eye(6 * M))
    else:
        S_inv = np.zeros((0, 0))
    out = {}
    for key in keys:
        i = index.slot[key]
        if i < M:
            block = S_inv[6 * i : 6 * i + 6, 6 * i : 6 * i + 6]
        else:
            n = i - M
            block = Hll_inv[n] + HinvW[n] @ S_inv @ HinvW[n].T
        out[key] = 0.5 * (block + block.T)
    return out


def marginal_covariance(graph: FactorGraph, estimates: Mapping[VariableKey, Pose], key: VariableKey) -> np.ndarray:
    return marginal_covariances(graph, estimates, [key])[key]


def graph_cost(graph: FactorGraph, estimates: Mapping[VariableKey, Pose]) -> float:
    index = _Index(graph, estimates.keys())
    return index.cost(*index.state(estimates))


def dense_solve(system: LinearSystem, lam: float = 0.0) -> dict[VariableKey, np.ndarray]:
    """Whole-system reference solve, no elimination."""
    A, b = system.dense()
    H = A.T @ A + lam * np.eye(A.shape[1])
    d = np.linalg.solve(H, -A.T @ b)
    return {k: d[6 * i : 6 * i + 6] for i, k in enumerate(system.keys)}
