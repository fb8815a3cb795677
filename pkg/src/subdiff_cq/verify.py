"""Self-checks run by ``subdiff-cq verify``: oracle equivalence and invariants."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cq import generate_weights, weights_by_recurrence
from .fem1d import (
    Coefficient,
    Mesh1D,
    NodalData,
    TriDiag,
    assemble_mass,
    assemble_stiffness,
    l2_norm,
    solve_tridiag,
    thomas,
)
from .oracle import SineMode, exact_homogeneous, mittag_leffler
from .stepper import SCHEMES, Problem, run_corrected_bdf2, run_scheme

__all__ = ["CheckResult", "CHECKS", "run_checks"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def check_weights_alpha_one() -> tuple[bool, str]:
    b = generate_weights(1.0, "bdf2", 10).b
    err = float(np.max(np.abs(b - np.r_[1.5, -2.0, 0.5, np.zeros(8)])))
    return err <= 1e-15, f"max deviation from (3/2, -2, 1/2, 0, ...) = {err:.1e}"


def check_weights_dual_route(n: int = 5000) -> tuple[bool, str]:
    worst = 0.0
    for alpha in (0.25, 0.5, 0.75):
        conv = generate_weights(alpha, "bdf2", n).b
        rec = weights_by_recurrence(alpha, "bdf2", n)
        worst = max(worst, float(np.max(np.abs(conv - rec) / np.abs(rec))))
    return worst <= 1e-13, f"max relative gap convolution vs recurrence, j <= {n}: {worst:.2e}"


def check_partial_sums(n: int = 5000) -> tuple[bool, str]:
    bad = []
    for alpha in (0.25, 0.5, 0.75):
        s = np.abs(np.cumsum(generate_weights(alpha, "bdf2", n).b))
        if np.any(np.diff(s[4:]) > 0):
            bad.append(alpha)
    return not bad, "|S_n| non-increasing for 4 <= n <= 5000" + (f"; violated for {bad}" if bad else "")


def _constant_problem(alpha: float) -> Problem:
    # u = x(1-x) is stationary when f = A(t)u = 2 (2 + cos t)
    a = Coefficient(lambda x, t: np.full(np.shape(x), 2.0 + math.cos(t)), lam=3.0)
    return Problem(alpha, 1.0, a,
                   f=lambda x, t: np.full(np.shape(x), 2.0 * (2.0 + math.cos(t))),
                   u0=NodalData(lambda x: x * (1.0 - x)), label="stationary")


def check_constant_solution() -> tuple[bool, str]:
    mesh = Mesh1D(200)
    mass = assemble_mass(mesh)
    u0 = mesh.interior_nodes * (1 - mesh.interior_nodes)
    worst = 0.0
    for alpha in (0.3, 0.7):
        for scheme in SCHEMES:
            traj = run_scheme(scheme, _constant_problem(alpha), mesh, 40)
            worst = max(worst, max(l2_norm(mesh, mass, u - u0) for u in traj.snapshots))
    return worst <= 1e-9, f"max L2 drift from the stationary solution: {worst:.1e}"


def check_stiffness(seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    mesh = Mesh1D(64)
    a = Coefficient(lambda x, t: 2.0 + np.cos(t) + 0.5 * np.sin(3 * x + t), lam=3.5)
    base = assemble_stiffness(mesh, 1.0, 0.0)
    ok = True
    for t in np.linspace(0.0, 3.0, 7):
        s = assemble_stiffness(mesh, a, float(t))
        ok &= np.array_equal(s.sub, s.sup)
        for _ in range(20):
            v = rng.standard_normal(mesh.n_interior)
            ok &= v @ s.matvec(v) >= v @ base.matvec(v) / a.lam
    return bool(ok), "symmetric and v^T S v >= v^T S_1 v / lambda on random v"


def check_ml_monotone() -> tuple[bool, str]:
    xs = np.logspace(-6, 6, 121)
    ok = True
    for alpha in (0.25, 0.5, 0.75):
        vals = np.array([mittag_leffler(alpha, 1.0, -x) for x in xs])
        ok &= bool(np.all(vals > 0) and np.all(np.diff(vals) < 0) and vals[0] <= 1)
    return ok, "E_alpha(-x) positive, <= 1, strictly decreasing on [1e-6, 1e6]"


def check_tridiag(seed: int = 1) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (1, 2, 5, 17):
        off = rng.uniform(-1, 1, n - 1)
        diag = np.abs(rng.uniform(1, 2, n)) + np.r_[np.abs(off), 0] + np.r_[0, np.abs(off)]
        mat = TriDiag(off, diag, off.copy())
        rhs = rng.standard_normal(n)
        dense = np.linalg.solve(mat.toarray(), rhs)
        nonsym = TriDiag(off, diag, 0.5 * off)
        dense_ns = np.linalg.solve(nonsym.toarray(), rhs)
        worst = max(worst, np.max(np.abs(solve_tridiag(mat, rhs) - dense)),
                    np.max(np.abs(thomas(mat, rhs) - dense)),
                    np.max(np.abs(solve_tridiag(nonsym, rhs) - dense_ns)))
    return worst <= 1e-12, f"max deviation from dense elimination: {worst:.1e}"


def check_config_roundtrip() -> tuple[bool, str]:
    from .cli import RunConfig, dump_config, parse_config_text
    from .experiments import StudySpec

    cfg = RunConfig(studies=(StudySpec(preset="b", scheme="vanilla", alphas=(0.3, 0.6)),
                             StudySpec(preset="c", t_finals=(1.0,))),
                    output_dir="out", jobs=2, verbosity=1)
    again = parse_config_text(dump_config(cfg))
    return again == cfg, "dump -> parse reproduces the RunConfig"


def check_oracle_equivalence(N: int = 2560, M: int = 1000) -> tuple[bool, str]:
    mesh = Mesh1D(M)
    mass = assemble_mass(mesh)
    u0 = SineMode(1)
    details, ok = [], True
    for alpha in (0.25, 0.5, 0.75):
        problem = Problem(alpha, 1.0, Coefficient.constant(1.0), u0=u0)
        exact = exact_homogeneous(mesh, 1.0, alpha, u0, 1.0, modes=1)
        err = l2_norm(mesh, mass, run_corrected_bdf2(problem, mesh, N, keep=[]).final - exact)
        semi = exact_homogeneous(mesh, 1.0, alpha, u0, 1.0, modes=1, semidiscrete=True)
        ns = [N // 8, N // 4, N // 2, N]
        errs = [l2_norm(mesh, mass, run_corrected_bdf2(problem, mesh, n, keep=[]).final - semi) for n in ns]
        order = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        ok &= err <= 1e-7 and order >= 1.9
        details.append(f"alpha={alpha}: err={err:.1e}, order={order:.2f}")
    return bool(ok), "; ".join(details)


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "weights_alpha_one": check_weights_alpha_one,
    "weights_dual_route": check_weights_dual_route,
    "weights_partial_sums": check_partial_sums,
    "constant_solution": check_constant_solution,
    "stiffness_symmetry_ellipticity": check_stiffness,
    "ml_monotonicity": check_ml_monotone,
    "tridiag_vs_dense": check_tridiag,
    "config_roundtrip": check_config_roundtrip,
    "oracle_equivalence": check_oracle_equivalence,
}


def run_checks(names=None) -> list[CheckResult]:
    results = []
    for name in names or CHECKS:
        start = time.perf_counter()
        try:
            passed, detail = CHECKS[name]()
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return results
