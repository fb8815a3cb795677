"""P1 Galerkin finite elements on the unit interval with homogeneous Dirichlet data.

All matrices and vectors live on the interior nodes ``x_1..x_{M-1}``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lapack

from ._validation import check_count, check_positive

__all__ = [
    "Coefficient",
    "EllipticityError",
    "Mesh1D",
    "NodalData",
    "PowerLaw",
    "SingularMatrixError",
    "TriDiag",
    "assemble_mass",
    "assemble_stiffness",
    "element_stiffness",
    "interpolate",
    "l2_norm",
    "l2_project",
    "load_vector",
    "solve_spd_tridiag",
    "solve_tridiag",
    "thomas",
]

# 2-point Gauss-Legendre on the reference element [0, 1]
_GAUSS2_NODES = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
_GAUSS2_WEIGHTS = np.array([0.5, 0.5])


class SingularMatrixError(ArithmeticError):
    """A tridiagonal factorization hit a non-positive or vanishing pivot."""


class EllipticityError(ValueError):
    """A diffusion coefficient left its declared ellipticity bounds."""


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh of (0, 1) with ``M`` cells."""

    M: int

    def __post_init__(self) -> None:
        check_count(self.M, "M", minimum=2)

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def n_interior(self) -> int:
        return self.M - 1

    @property
    def nodes(self) -> np.ndarray:
        """All node coordinates, boundary included."""
        return np.arange(self.M + 1) / self.M

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.arange(1, self.M) / self.M

    def quadrature_points(self, nodes=_GAUSS2_NODES) -> np.ndarray:
        """Quadrature points, shape ``(M, len(nodes))``, element by element. Read-only."""
        return _quadrature_points(self.M, tuple(float(v) for v in nodes))


@functools.lru_cache(maxsize=32)
def _quadrature_points(M: int, nodes: tuple[float, ...]) -> np.ndarray:
    left = np.arange(M)[:, None] / M
    pts = left + (1.0 / M) * np.asarray(nodes)[None, :]
    pts.setflags(write=False)
    return pts


@functools.lru_cache(maxsize=16)
def _gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True)
class TriDiag:
    """Tridiagonal matrix stored by diagonals."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.diag)
        if len(self.sub) != max(n - 1, 0) or len(self.sup) != max(n - 1, 0):
            raise ValueError("off-diagonals must have length n - 1")
        for arr in (self.sub, self.diag, self.sup):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.diag)

    @property
    def is_symmetric(self) -> bool:
        return np.array_equal(self.sub, self.sup)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[1:] += self.sub * v[:-1]
        out[:-1] += self.sup * v[1:]
        return out

    __matmul__ = matvec

    def scaled(self, c: float) -> TriDiag:
        return TriDiag(c * self.sub, c * self.diag, c * self.sup)

    def __add__(self, other: TriDiag) -> TriDiag:
        return TriDiag(self.sub + other.sub, self.diag + other.diag, self.sup + other.sup)

    def toarray(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def inf_norm(self) -> float:
        rows = np.abs(self.diag).copy()
        rows[1:] += np.abs(self.sub)
        rows[:-1] += np.abs(self.sup)
        return float(rows.max())


@dataclass(frozen=True)
class Coefficient:
    """Scalar diffusion coefficient ``a(x, t)`` with bounds ``1/lam <= a <= lam``.

    ``func`` must accept an array of ``x`` and a scalar ``t``.
    """

    func: Callable[[np.ndarray, float], np.ndarray]
    lam: float
    name: str = field(default="custom", compare=False)

    def __post_init__(self) -> None:
        if not self.lam >= 1.0:
            raise ValueError(f"ellipticity constant must be >= 1, got {self.lam}")

    def __call__(self, x, t: float) -> np.ndarray:
        values = np.broadcast_to(np.asarray(self.func(x, t), dtype=float), np.shape(x))
        lo, hi = 1.0 / self.lam, self.lam
        if not np.all((values >= lo) & (values <= hi)):
            bad = values[~((values >= lo) & (values <= hi))].flat[0]
            raise EllipticityError(
                f"a(x, t={t}) = {bad} outside ellipticity bounds [{lo}, {hi}]"
            )
        return values

    @classmethod
    def constant(cls, value: float) -> Coefficient:
        value = check_positive(value, "value")
        return cls(lambda x, t: np.full(np.shape(x), value), lam=max(value, 1.0 / value),
                   name=f"const({value:g})")


class PowerLaw:
    """The function ``x**p`` on (0, 1), ``p > -1``, with exact hat-function moments.

    :func:`l2_project` uses :meth:`hat_moments` instead of quadrature, which keeps
    an integrable singularity at ``x = 0`` from polluting the projection.
    """

    def __init__(self, p: float):
        if not p > -1.0:
            raise ValueError(f"x**p is not integrable on (0, 1) for p={p}")
        self.p = float(p)

    def __call__(self, x):
        return np.asarray(x, dtype=float) ** self.p

    def __repr__(self) -> str:
        return f"PowerLaw({self.p:g})"

    def hat_moments(self, mesh: Mesh1D) -> np.ndarray:
        """``(x**p, phi_i)`` for every interior hat function."""
        p, h = self.p, mesh.h
        x = mesh.nodes
        # per element [x_k, x_{k+1}]: I0 = int x^p dx, I1 = int x^(p+1) dx
        xp1 = x ** (p + 1.0) / (p + 1.0)
        xp2 = x ** (p + 2.0) / (p + 2.0)
        i0 = np.diff(xp1)
        i1 = np.diff(xp2)
        left = x[:-1]
        right = x[1:]
        # rising half (x - x_k)/h on element k supports node k+1;
        # falling half (x_{k+1} - x)/h supports node k
        rising = (i1 - left * i0) / h
        falling = (right * i0 - i1) / h
        return rising[:-1] + falling[1:]


class NodalData:
    """Initial datum whose discrete representative is its nodal interpolant.

    :func:`l2_project` returns the interpolant unchanged, which makes discrete
    identities such as ``S U0 = (-(a u0')', phi)`` exact for quadratic ``u0``.
    """

    def __init__(self, func: Callable):
        self.func = func

    def __call__(self, x):
        return self.func(x)

    def hat_moments(self, mesh: Mesh1D) -> np.ndarray:
        return assemble_mass(mesh).matvec(interpolate(mesh, self.func))


def _check_symmetric_spd(mat: TriDiag, name: str) -> TriDiag:
    if not mat.is_symmetric:
        raise AssertionError(f"{name} matrix lost symmetry")
    return mat


def assemble_mass(mesh: Mesh1D) -> TriDiag:
    """Consistent P1 mass matrix: rows ``(h/6, 4h/6, h/6)``."""
    n, h = mesh.n_interior, mesh.h
    off = np.full(n - 1, h / 6.0)
    return TriDiag(off, np.full(n, 4.0 * h / 6.0), off.copy())


def element_stiffness(mesh: Mesh1D, a: Coefficient | Callable | float, t: float) -> np.ndarray:
    """Per-element ``(1/h^2) int_K a(x, t) dx`` by 2-point Gauss, shape ``(M,)``."""
    if not isinstance(a, Coefficient):
        a = Coefficient.constant(a) if np.isscalar(a) else Coefficient(a, lam=np.inf)
    return (a(mesh.quadrature_points(), t) @ _GAUSS2_WEIGHTS) / mesh.h


def assemble_stiffness(mesh: Mesh1D, a: Coefficient | Callable | float, t: float) -> TriDiag:
    """Stiffness matrix of ``-(a(., t) u')'`` with 2-point Gauss per element."""
    k_elem = element_stiffness(mesh, a, t)
    diag = k_elem[:-1] + k_elem[1:]
    off = -k_elem[1:-1]
    return _check_symmetric_spd(TriDiag(off, diag, off.copy()), "stiffness")


def load_vector(mesh: Mesh1D, f: Callable, t: float, *, order: int = 2) -> np.ndarray:
    """Entries ``(f(., t), phi_i)`` by ``order``-point Gauss per element.

    ``f`` is called as ``f(x, t)`` with an array ``x``. Discontinuities must sit
    on mesh nodes; quadrature points never touch element endpoints.
    """
    nodes, weights = _gauss_rule(order)
    xq = mesh.quadrature_points(nodes)
    fq = np.broadcast_to(np.asarray(f(xq, t), dtype=float), xq.shape)
    h = mesh.h
    rising = h * (fq * nodes) @ weights
    falling = h * (fq * (1.0 - nodes)) @ weights
    return rising[:-1] + falling[1:]


def l2_project(mesh: Mesh1D, g: Callable, *, order: int = 4, mass: TriDiag | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``g`` onto the P1 space.

    Objects exposing ``hat_moments(mesh)`` (e.g. :class:`PowerLaw`) supply exact
    right-hand sides; anything else is integrated by Gauss quadrature.
    """
    if hasattr(g, "hat_moments"):
        rhs = np.asarray(g.hat_moments(mesh), dtype=float)
    else:
        rhs = load_vector(mesh, lambda x, t: g(x), 0.0, order=order)
    return solve_tridiag(mass if mass is not None else assemble_mass(mesh), rhs)


def interpolate(mesh: Mesh1D, g: Callable) -> np.ndarray:
    """Nodal interpolant at the interior nodes."""
    return np.asarray(g(mesh.interior_nodes), dtype=float)


def thomas(mat: TriDiag, rhs: np.ndarray) -> np.ndarray:
    """Thomas algorithm without pivoting.

    Raises :class:`SingularMatrixError` on a pivot that is non-positive or
    smaller than 1e-300 in magnitude.
    """
    sub, sup = mat.sub.tolist(), mat.sup.tolist()
    d = mat.diag.tolist()
    y = np.asarray(rhs, dtype=float).tolist()
    n = len(d)
    if len(y) != n:
        raise ValueError(f"rhs has length {len(y)}, matrix has {n} rows")
    piv = d[0]
    if not piv > 1e-300:
        raise SingularMatrixError(f"pivot {piv!r} at row 0")
    c = [0.0] * n
    for i in range(1, n):
        c[i - 1] = sup[i - 1] / piv
        y[i - 1] /= piv
        piv = d[i] - sub[i - 1] * c[i - 1]
        if not piv > 1e-300:
            raise SingularMatrixError(f"pivot {piv!r} at row {i}")
        y[i] -= sub[i - 1] * y[i - 1]
    y[n - 1] /= piv
    for i in range(n - 2, -1, -1):
        y[i] -= c[i] * y[i + 1]
    return np.array(y)


def solve_tridiag(mat: TriDiag, rhs: np.ndarray) -> np.ndarray:
    """Solve ``mat @ x = rhs``.

    Symmetric matrices go through LAPACK's LDL^T factorization (``dpttrf``),
    which is the Thomas elimination specialised to symmetric positive definite
    systems and fails on the same non-positive pivots. Other matrices use
    :func:`thomas`.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (mat.n,):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({mat.n},)")
    if not mat.is_symmetric or mat.n == 1:
        return thomas(mat, rhs)
    d, e, info = lapack.dpttrf(mat.diag, mat.sub)
    if info != 0 or not np.all(d > 1e-300):
        raise SingularMatrixError(
            f"tridiagonal matrix is not positive definite (LAPACK info={info})"
        )
    x, info = lapack.dpttrs(d, e, rhs)
    if info != 0:
        raise SingularMatrixError(f"dpttrs failed with info={info}")
    return x


def solve_spd_tridiag(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric positive definite tridiagonal system given by its diagonals.

    Same factorization as :func:`solve_tridiag` without building a :class:`TriDiag`;
    the time steppers call it once per step.
    """
    if len(diag) == 1:
        if not diag[0] > 1e-300:
            raise SingularMatrixError("1x1 system with non-positive pivot")
        return rhs / diag
    _, _, x, info = lapack.dptsv(diag, off, rhs)
    if info != 0:
        raise SingularMatrixError(f"tridiagonal matrix is not positive definite (LAPACK info={info})")
    return x


def l2_norm(mesh: Mesh1D, mass: TriDiag | None, v: np.ndarray) -> float:
    """Discrete L2 norm ``sqrt(v^T M v)`` of a P1 function."""
    if mass is None:
        mass = assemble_mass(mesh)
    v = np.asarray(v, dtype=float)
    if v.shape != (mesh.n_interior,):
        raise ValueError(f"vector has shape {v.shape}, mesh has {mesh.n_interior} interior nodes")
    return math.sqrt(max(float(v @ mass.matvec(v)), 0.0))
