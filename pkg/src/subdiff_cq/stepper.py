"""Fully discrete time stepping: BDF2 convolution quadrature (with and without
first-step correction) and backward-Euler convolution quadrature, P1 FEM in space.

Every scheme solves, for ``n = 1..N``,

    tau^-alpha M sum_{j=0}^{n} b_j (U^{n-j} - U^0) + S(t_n) U^n = F(t_n)

where ``M`` is the mass matrix, ``S(t)`` the stiffness matrix and ``F(t)`` the
load vector. The corrected scheme adds ``(F(0) - S(0) U^0) / 2`` to the
right-hand side of the first step only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ._validation import check_alpha, check_count, check_positive
from .cq import CqMethod, generate_weights
from .fem1d import (
    Coefficient,
    Mesh1D,
    assemble_mass,
    element_stiffness,
    l2_project,
    load_vector,
    solve_spd_tridiag,
)

__all__ = [
    "Problem",
    "SCHEMES",
    "Trajectory",
    "run_backward_euler",
    "run_corrected_bdf2",
    "run_scheme",
    "run_vanilla_bdf2",
]

SCHEMES = ("vanilla", "corrected", "backward_euler")

# steps per block of the history sum; far history is one matrix-matrix product per block.
# history="direct" does one matrix-vector product over the whole past per step instead.
_BLOCK = 64


@dataclass(frozen=True)
class Problem:
    """One subdiffusion problem on (0, 1) with zero Dirichlet data.

    ``f`` is called as ``f(x, t)`` and ``u0`` as ``u0(x)``; ``None`` means zero.
    """

    alpha: float
    T: float
    a: Coefficient
    f: Callable[[np.ndarray, float], np.ndarray] | None = None
    u0: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = "custom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "T", check_positive(self.T, "T"))
        if not isinstance(self.a, Coefficient):
            raise TypeError("a must be a Coefficient")

    def with_(self, **changes) -> Problem:
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class Trajectory:
    """Snapshots ``U^n`` of one run, indexed by step number."""

    tau: float
    mesh: Mesh1D
    steps: np.ndarray
    snapshots: np.ndarray
    scheme: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.tau

    def at_step(self, n: int) -> np.ndarray:
        hit = np.flatnonzero(self.steps == n)
        if hit.size == 0:
            raise KeyError(f"step {n} was not kept; kept steps: {self.steps.tolist()[:10]}...")
        return self.snapshots[hit[0]]


def _tri_matvec(diag: np.ndarray, off: np.ndarray, v) -> np.ndarray:
    out = diag * v
    out[1:] += off * v[:-1]
    out[:-1] += off * v[1:]
    return out


def _zero_load(mesh: Mesh1D) -> np.ndarray:
    return np.zeros(mesh.n_interior)


def _march(
    problem: Problem,
    mesh: Mesh1D,
    N: int,
    method: CqMethod,
    correct: bool,
    keep: Iterable[int] | None,
    scheme: str,
    history_mode: str = "blocked",
) -> Trajectory:
    N = check_count(N, "N", minimum=1)
    alpha, a, f = problem.alpha, problem.a, problem.f
    tau = problem.T / N
    scale = tau ** (-alpha)
    b = generate_weights(alpha, method, N).b
    mass = assemble_mass(mesh)
    dof = mesh.n_interior

    u0 = np.zeros(dof) if problem.u0 is None else l2_project(mesh, problem.u0, mass=mass)

    def load(t: float) -> np.ndarray:
        return _zero_load(mesh) if f is None else load_vector(mesh, f, t)

    # hist[k] = U^k - U^0; row 0 stays zero
    hist = np.zeros((N + 1, dof))
    m_diag, m_off = mass.diag, mass.sub
    lhs_diag, lhs_off = (b[0] * scale) * m_diag, (b[0] * scale) * m_off
    far = np.zeros((0, dof))
    block_start = 1

    if history_mode not in ("blocked", "direct"):
        raise ValueError(f"history must be 'blocked' or 'direct', got {history_mode!r}")
    direct = history_mode == "direct"
    has_u0 = problem.u0 is not None

    def stiffness_times_u0(k: np.ndarray) -> np.ndarray:
        return _tri_matvec(k[:-1] + k[1:], -k[1:-1], u0)

    for n in range(1, N + 1):
        if direct:
            history = b[n - 1 : 0 : -1] @ hist[1:n] if n > 1 else np.zeros(dof)
        elif (n - 1) % _BLOCK == 0:
            block_start = n
            rows = np.arange(n, min(n + _BLOCK, N + 1))
            if n > 1:
                # contributions of U^1..U^{n-1} to every step of this block
                ks = np.arange(1, n)
                far = b[rows[:, None] - ks[None, :]] @ hist[1:n]
            else:
                far = np.zeros((len(rows), dof))
        if not direct:
            near = b[n - block_start : 0 : -1] @ hist[block_start:n] if n > block_start else 0.0
            history = far[n - block_start] + near

        t = n * tau
        k = element_stiffness(mesh, a, t)
        rhs = load(t) - scale * _tri_matvec(m_diag, m_off, history)
        if has_u0:
            rhs -= stiffness_times_u0(k)
        if correct and n == 1:
            rhs += 0.5 * load(0.0)
            if has_u0:
                rhs -= 0.5 * stiffness_times_u0(element_stiffness(mesh, a, 0.0))
        # solve for U^n - U^0 directly
        hist[n] = solve_spd_tridiag(lhs_diag + (k[:-1] + k[1:]), lhs_off - k[1:-1], rhs)

    if keep is None:
        steps = np.arange(N + 1)
    else:
        steps = np.array(sorted({check_count(int(k), "checkpoint") for k in keep} | {N}))
        if steps[-1] > N:
            raise ValueError(f"checkpoint {steps[-1]} beyond final step {N}")
    snapshots = hist[steps] + u0
    return Trajectory(
        tau=tau,
        mesh=mesh,
        steps=steps,
        snapshots=snapshots,
        scheme=scheme,
        meta={"alpha": alpha, "T": problem.T, "N": N, "label": problem.label},
    )


def run_vanilla_bdf2(problem: Problem, mesh: Mesh1D, N: int, *, keep=None,
                     history: str = "blocked") -> Trajectory:
    """BDF2 convolution quadrature without correction (first order for nonsmooth data)."""
    return _march(problem, mesh, N, CqMethod.BDF2, False, keep, "vanilla", history)


def run_corrected_bdf2(problem: Problem, mesh: Mesh1D, N: int, *, keep=None,
                       history: str = "blocked") -> Trajectory:
    """BDF2 convolution quadrature with the first-step correction.

    The first step adds ``(F(0) - S(0) U^0) / 2`` to its right-hand side, which
    restores second-order accuracy for nonsmooth initial data and sources that
    do not vanish at ``t = 0``. With ``u0 = 0`` and ``f(., 0) = 0`` it coincides
    with :func:`run_vanilla_bdf2`.
    """
    return _march(problem, mesh, N, CqMethod.BDF2, True, keep, "corrected", history)


def run_backward_euler(problem: Problem, mesh: Mesh1D, N: int, *, keep=None,
                       history: str = "blocked") -> Trajectory:
    return _march(problem, mesh, N, CqMethod.BDF1, False, keep, "backward_euler", history)


_RUNNERS = {
    "vanilla": run_vanilla_bdf2,
    "corrected": run_corrected_bdf2,
    "backward_euler": run_backward_euler,
}


def run_scheme(scheme: str, problem: Problem, mesh: Mesh1D, N: int, *, keep=None,
               history: str = "blocked") -> Trajectory:
    try:
        runner = _RUNNERS[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}") from None
    return runner(problem, mesh, N, keep=keep, history=history)
