"""Reference solutions independent of the time steppers.

Contains a Mittag-Leffler evaluator for the negative real axis, the spectral
solution of the constant-coefficient homogeneous problem, the scalar Duhamel
integral for a single eigenmode, and a classical implicit-Euler heat solver
for the ``alpha -> 1`` limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from ._validation import check_count
from .fem1d import (
    Coefficient,
    Mesh1D,
    PowerLaw,
    assemble_mass,
    assemble_stiffness,
    l2_project,
    load_vector,
    solve_tridiag,
)

__all__ = [
    "MlParams",
    "MittagLefflerError",
    "SineMode",
    "TruncationError",
    "duhamel_mode",
    "exact_homogeneous",
    "implicit_euler_heat",
    "mittag_leffler",
    "sine_coefficient",
]

_EPS = np.finfo(float).eps


class MittagLefflerError(ArithmeticError):
    """No branch of the Mittag-Leffler evaluation reached the requested accuracy."""


class TruncationError(ArithmeticError):
    """A truncated modal sum still carries a non-negligible last term."""


@dataclass(frozen=True)
class MlParams:
    """Accuracy knobs for :func:`mittag_leffler`.

    The power series is used for ``|z| <= series_radius`` as long as its
    cancellation stays below ``rtol``; the asymptotic expansion is used when its
    smallest term is below ``rtol``; everything else goes to the integral
    representation on (0, inf).
    """

    series_radius: float = 12.0
    max_terms: int = 2000
    rtol: float = 1e-12


_DEFAULT = MlParams()


def _series(alpha: float, beta: float, z: float, params: MlParams) -> tuple[float, float] | None:
    """Power series; returns (value, estimated relative error) or None."""
    total = 0.0
    biggest = 0.0
    log_abs_z = math.log(abs(z))
    # |E| <= 1 on the negative axis, so terms beyond this size cancel away the accuracy
    log_cap = math.log(params.rtol / (10 * _EPS))
    for k in range(params.max_terms):
        log_term = k * log_abs_z - math.lgamma(alpha * k + beta)
        if log_term > log_cap:
            return None
        term = math.exp(log_term)
        total += -term if (z < 0 and k % 2) else term
        biggest = max(biggest, term)
        if k > 2 and term < _EPS * 1e-2 * abs(total):
            break
    else:
        return None
    if total == 0.0:
        return None
    return total, biggest * _EPS * 10 / abs(total)


def _asymptotic(alpha: float, beta: float, z: float, params: MlParams) -> tuple[float, float] | None:
    """``-sum_{k>=1} z^-k / Gamma(beta - alpha k)``, cut where the terms stop shrinking.

    Terms near a pole of 1/Gamma can be accidentally tiny, so the remainder is
    judged by the envelope of the next three terms, not a single term.
    """
    terms = []
    for k in range(1, params.max_terms):
        terms.append(-(z ** (-k)) * float(special.rgamma(beta - alpha * k)))
        if len(terms) >= 6:
            env_now = max(abs(t) for t in terms[-3:])
            env_before = max(abs(t) for t in terms[-6:-3])
            if env_now > env_before or env_now == 0.0:
                break
    mags = np.abs(terms)
    envelope = np.array([mags[k : k + 3].max() for k in range(len(mags) - 2)])
    cut = int(np.argmin(envelope))
    total = float(np.sum(terms[:cut]))
    if total == 0.0:
        return None
    return total, float(envelope[cut]) / abs(total)


def _integral(alpha: float, beta: float, z: float) -> tuple[float, float]:
    """Integral representation valid for ``z < 0``, ``0 < alpha < 1``, ``beta < 1 + alpha``."""
    x = -z
    s1 = math.sin(math.pi * (1.0 - beta))
    s2 = math.sin(math.pi * (1.0 - beta + alpha))
    c = math.cos(math.pi * alpha)
    expo = (1.0 - beta) / alpha

    def kernel(chi: float) -> float:
        if chi == 0.0:
            return 0.0 if expo > 0 else (0.0 if s2 == 0 else kernel(1e-300))
        num = chi**expo * math.exp(-(chi ** (1.0 / alpha))) * (chi * s1 + x * s2)
        return num / (alpha * math.pi * (chi * chi + 2.0 * chi * x * c + x * x))

    # exp(-chi^(1/alpha)) is below 1e-300 beyond chi = 690**alpha
    upper = 700.0**alpha
    breaks = sorted({p for p in (x, 1.0, 0.5 * upper) if 0.0 < p < upper})
    value, abserr = 0.0, 0.0
    edges = [0.0, *breaks, upper]
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(kernel, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)
        value += v
        abserr += e
    return value, abserr / abs(value) if value else math.inf


def mittag_leffler(alpha: float, beta: float, z: float, params: MlParams = _DEFAULT) -> float:
    """Two-parameter Mittag-Leffler function ``E_{alpha,beta}(z)`` for real ``z <= 0``.

    Supports ``0 < alpha <= 1`` and ``0 < beta <= 1 + alpha`` (``alpha = 1``
    requires ``beta = 1``, where the function is the exponential). Raises
    :class:`MittagLefflerError` when no branch reaches ``params.rtol``.

    >>> round(mittag_leffler(1.0, 1.0, -1.0), 8)
    0.36787944
    """
    alpha, beta, z = float(alpha), float(beta), float(z)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0.0 < beta <= 1.0 + alpha:
        raise ValueError(f"beta must lie in (0, 1 + alpha], got {beta}")
    if z > 0.0 or not math.isfinite(z):
        raise ValueError(f"only finite z <= 0 is supported, got {z}")
    if z == 0.0:
        return float(special.rgamma(beta))
    if alpha == 1.0:
        if beta == 1.0:
            return math.exp(z)
        if beta == 2.0:
            return -math.expm1(z) / -z
        raise ValueError("alpha = 1 is only supported for beta in {1, 2}")

    if -z <= params.series_radius:
        res = _series(alpha, beta, z, params)
        if res is not None and res[1] <= params.rtol:
            return res[0]
    res = _asymptotic(alpha, beta, z, params)
    if res is not None and res[1] <= params.rtol:
        return res[0]
    if beta < 1.0 + alpha:
        value, rel = _integral(alpha, beta, z)
        if rel <= max(params.rtol, 1e-11):
            return value
    elif beta > alpha and -z >= 1.0:
        # E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z moves beta back into the integral range
        return (mittag_leffler(alpha, beta - alpha, z, params) - float(special.rgamma(beta - alpha))) / z
    raise MittagLefflerError(
        f"E_{{{alpha},{beta}}}({z}) did not converge to rtol={params.rtol}"
    )


def sine_coefficient(u0: Callable, k: int) -> float:
    """``(u0, sqrt(2) sin(k pi x))`` on (0, 1).

    Power laws ``x**p`` are integrated after the substitution ``x = s**(1/(p+1))``,
    which removes the endpoint singularity.
    """
    k = check_count(k, "k", minimum=1)
    omega = k * math.pi
    if hasattr(u0, "sine_coefficient"):
        return float(u0.sine_coefficient(k))
    if isinstance(u0, PowerLaw):
        m = 1.0 / (u0.p + 1.0)
        val, _ = integrate.quad(lambda s: m * math.sin(omega * s**m), 0.0, 1.0,
                                epsabs=1e-14, epsrel=1e-13, limit=200 + 4 * k)
        return math.sqrt(2.0) * val
    val, _ = integrate.quad(lambda x: float(u0(np.array(x))), 0.0, 1.0, weight="sin",
                            wvar=omega, epsabs=1e-14, epsrel=1e-13, limit=200 + 4 * k)
    return math.sqrt(2.0) * val


class SineMode:
    """``sin(k pi x)``, with its exact sine coefficients."""

    def __init__(self, k: int = 1, amplitude: float = 1.0):
        self.k = check_count(k, "k", minimum=1)
        self.amplitude = float(amplitude)

    def __call__(self, x):
        return self.amplitude * np.sin(self.k * np.pi * np.asarray(x, dtype=float))

    def __repr__(self) -> str:
        return f"SineMode({self.k}, {self.amplitude:g})"

    def sine_coefficient(self, k: int) -> float:
        return self.amplitude / math.sqrt(2.0) if k == self.k else 0.0


def exact_homogeneous(
    mesh: Mesh1D,
    a0: float,
    alpha: float,
    u0: Callable,
    t: float,
    modes: int = 200,
    *,
    tol: float = 1e-12,
    semidiscrete: bool = False,
) -> np.ndarray:
    """Nodal values at the interior nodes of the spectral solution with ``a = a0``, ``f = 0``.

    ``u(x, t) = sum_k E_alpha(-a0 (k pi)^2 t^alpha) c_k sqrt(2) sin(k pi x)``.
    With ``semidiscrete=True`` the eigenvalues of the P1 generalized eigenproblem
    ``S v = lam M v`` replace ``(k pi)^2`` and ``c_k`` becomes the coefficient
    of the L2 projection of ``u0``; the result is then the exact solution of
    the spatially discrete problem on ``mesh``.

    Raises :class:`TruncationError` if the first omitted mode would contribute
    ``tol`` or more in sup norm.
    """
    modes = check_count(modes, "modes", minimum=1)
    if semidiscrete and modes > mesh.n_interior:
        raise ValueError(f"the mesh only supports {mesh.n_interior} discrete modes")
    x = mesh.interior_nodes
    h = mesh.h
    if semidiscrete:
        mass = assemble_mass(mesh)
        proj = l2_project(mesh, u0, mass=mass)

    def mode(k: int) -> tuple[float, np.ndarray]:
        shape = math.sqrt(2.0) * np.sin(k * math.pi * x)
        if semidiscrete:
            ck = 1 - math.cos(k * math.pi * h)
            lam = 6.0 / h**2 * ck / (3.0 - ck)
            # the nodal sine vector is an eigenvector; project in the mass inner product
            coef = float(proj @ mass.matvec(shape)) / float(shape @ mass.matvec(shape))
        else:
            lam = (k * math.pi) ** 2
            coef = sine_coefficient(u0, k)
        if coef == 0.0:
            return 0.0, shape
        decay = mittag_leffler(alpha, 1.0, -a0 * lam * t**alpha) if t > 0 else 1.0
        return decay * coef, shape

    out = np.zeros_like(x)
    for k in range(1, modes + 1):
        term, shape = mode(k)
        if term:
            out += term * shape
    if not (semidiscrete and modes == mesh.n_interior):
        # the first omitted mode decides whether the truncation is acceptable
        leftover = abs(mode(modes + 1)[0]) * math.sqrt(2.0)
        if leftover >= tol:
            raise TruncationError(
                f"mode {modes + 1} would still contribute {leftover:.3e} >= {tol:g}; increase modes"
            )
    return out


def duhamel_mode(
    alpha: float,
    lambda_k: float,
    g_k: Callable[[float], float],
    t: float,
    *,
    atol: float = 1e-10,
) -> float:
    """``int_0^t (t-s)^(alpha-1) E_{alpha,alpha}(-lambda_k (t-s)^alpha) g_k(s) ds``.

    The substitution ``s = t - sigma^(1/alpha)`` turns the weakly singular
    kernel into ``E_{alpha,alpha}(-lambda_k sigma) / alpha`` on ``[0, t^alpha]``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0.0:
        return 0.0
    if alpha == 1.0:
        kernel = lambda sigma: math.exp(-lambda_k * sigma)
    else:
        kernel = lambda sigma: mittag_leffler(alpha, alpha, -lambda_k * sigma)

    def integrand(sigma: float) -> float:
        return kernel(sigma) * float(g_k(t - sigma ** (1.0 / alpha))) / alpha

    value, err = integrate.quad(integrand, 0.0, t**alpha, epsabs=atol, epsrel=1e-12, limit=200)
    if not err <= max(atol, 1e-12 * abs(value)) * 10:
        raise MittagLefflerError(f"Duhamel quadrature did not converge (error estimate {err:.2e})")
    return value


def implicit_euler_heat(
    mesh: Mesh1D,
    a: Coefficient,
    u0: Callable | None,
    T: float,
    N: int,
    f: Callable | None = None,
) -> np.ndarray:
    """Backward Euler for ``u_t - (a u_x)_x = f`` with P1 elements; returns ``U^N``."""
    N = check_count(N, "N", minimum=1)
    tau = T / N
    mass = assemble_mass(mesh)
    u = np.zeros(mesh.n_interior) if u0 is None else l2_project(mesh, u0, mass=mass)
    for n in range(1, N + 1):
        t = n * tau
        rhs = mass.matvec(u)
        if f is not None:
            rhs += tau * load_vector(mesh, f, t)
        u = solve_tridiag(mass + assemble_stiffness(mesh, a, t).scaled(tau), rhs)
    return u
