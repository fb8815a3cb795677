"""Convolution quadrature weights for BDF1 and BDF2 generating functions.

The weights ``b_j`` are the Taylor coefficients of ``(tau * delta(zeta))**alpha``
at ``zeta = 0``. They are dimensionless; the ``tau**-alpha`` factor is applied
by the time steppers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._validation import check_alpha, check_count

__all__ = [
    "CqMethod",
    "CqWeights",
    "binomial_series",
    "generate_weights",
    "weights_by_recurrence",
]


class CqMethod(str, enum.Enum):
    BDF1 = "bdf1"
    BDF2 = "bdf2"

    @classmethod
    def parse(cls, value: CqMethod | str) -> CqMethod:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown CQ method {value!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class CqWeights:
    """Weights ``b_0..b_n`` of a fractional convolution quadrature."""

    alpha: float
    method: CqMethod
    b: np.ndarray

    def __post_init__(self) -> None:
        self.b.setflags(write=False)

    def __len__(self) -> int:
        return len(self.b)

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.b)


def binomial_series(alpha: float, n: int, scale: float = 1.0) -> np.ndarray:
    """Coefficients of ``(1 - scale * zeta)**alpha`` up to ``zeta**n``.

    Uses ``g_j = g_{j-1} * (j - 1 - alpha) / j``; every factor is exact up to
    one rounding so the coefficients carry a relative error of O(j * eps).
    """
    j = np.arange(1, n + 1, dtype=float)
    factors = (j - 1.0 - alpha) / j * scale
    g = np.empty(n + 1)
    g[0] = 1.0
    g[1:] = np.cumprod(factors)
    return g


def generate_weights(alpha: float, method: CqMethod | str, n: int) -> CqWeights:
    """Return the CQ weights ``b_0..b_n`` for ``alpha`` in (0, 1].

    BDF1 uses ``(1 - zeta)**alpha``. BDF2 factors
    ``((3 - 4 zeta + zeta**2) / 2)**alpha`` as
    ``(3/2)**alpha * (1 - zeta)**alpha * (1 - zeta/3)**alpha`` and convolves the
    two binomial series.

    Examples
    --------
    >>> generate_weights(1.0, "bdf2", 4).b.tolist()
    [1.5, -2.0, 0.5, 0.0, 0.0]
    """
    alpha = check_alpha(alpha, allow_one=True)
    n = check_count(n, "n", minimum=0)
    method = CqMethod.parse(method)

    first = binomial_series(alpha, n)
    if method is CqMethod.BDF1:
        b = first
    else:
        second = binomial_series(alpha, n, scale=1.0 / 3.0)
        # the (1 - zeta/3) series underflows past j ~ 700, so truncate it there
        nz = np.flatnonzero(second)
        second = second[: nz[-1] + 1]
        b = np.convolve(first, second)[: n + 1] * 1.5**alpha
    return CqWeights(alpha=alpha, method=method, b=np.ascontiguousarray(b))


def weights_by_recurrence(alpha: float, method: CqMethod | str, n: int) -> np.ndarray:
    """Same weights as :func:`generate_weights`, from the ODE ``w' p = alpha p' w``.

    Writing ``p(zeta) = p0 + p1 zeta + p2 zeta**2`` and ``w = p**alpha`` gives the
    three-term recurrence

        (j+1) p0 w_{j+1} = (alpha - j) p1 w_j + (2 alpha - j + 1) p2 w_{j-1}.

    Kept as an independent check of the convolution route.
    """
    alpha = check_alpha(alpha, allow_one=True)
    n = check_count(n, "n", minimum=0)
    method = CqMethod.parse(method)
    if method is CqMethod.BDF1:
        p0, p1, p2 = 1.0, -1.0, 0.0
    else:
        p0, p1, p2 = 1.5, -2.0, 0.5

    w = np.zeros(n + 1)
    w[0] = p0**alpha
    prev, cur = 0.0, w[0]
    for j in range(n):
        nxt = ((alpha - j) * p1 * cur + (2.0 * alpha - j + 1.0) * p2 * prev) / ((j + 1) * p0)
        w[j + 1] = nxt
        prev, cur = cur, nxt
    return w
