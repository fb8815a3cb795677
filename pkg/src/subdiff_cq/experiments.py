"""Temporal convergence studies against fine-step reference solutions."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ._validation import check_alpha, check_count, check_positive
from .fem1d import Coefficient, Mesh1D, PowerLaw, assemble_mass, l2_norm
from .stepper import SCHEMES, Problem, run_corrected_bdf2, run_scheme

__all__ = [
    "PRESETS",
    "ConvergenceReport",
    "StudySpec",
    "T_INTERPRETATIONS",
    "fit_rate",
    "format_rate",
    "preset_problem",
    "reference_solution",
    "run_study",
]

PRESETS = ("a", "b", "c", "zero")
T_INTERPRETATIONS = ("final_time", "unit_step")


def diffusivity(x, t):
    """``2 + cos(t)``, uniform in space."""
    return np.full(np.shape(x), 2.0 + math.cos(t))


# 1 <= 2 + cos t <= 3
TIME_DEPENDENT = Coefficient(diffusivity, lam=3.0, name="2+cos(t)")


def source_b(x, t):
    """``e^t (1 + indicator of (0, 1/2))``."""
    x = np.asarray(x, dtype=float)
    return math.exp(t) * (1.0 + (x < 0.5))


def source_c(x, t):
    """``t^0.5 x (1 - x)``: continuous, but not differentiable at ``t = 0``."""
    x = np.asarray(x, dtype=float)
    return math.sqrt(t) * x * (1.0 - x)


@dataclass(frozen=True)
class _PresetInfo:
    u0: object
    f: object
    steps: tuple[int, ...]
    n_ref: int
    needs_even_mesh: bool = False


_PRESETS = {
    "a": _PresetInfo(PowerLaw(-0.25), None, (10, 20, 40, 80, 160, 320), 5000),
    "b": _PresetInfo(None, source_b, (10, 20, 40, 80, 160, 320), 5000, needs_even_mesh=True),
    # the 1600-step runs need a reference well beyond 4 * 1600 steps
    "c": _PresetInfo(None, source_c, (50, 100, 200, 400, 800, 1600), 20000),
    "zero": _PresetInfo(None, None, (10, 20, 40), 200),
}


def preset_problem(name: str, alpha: float = 0.5, T: float = 1.0) -> Problem:
    """Problem on (0, 1) with ``a(x, t) = 2 + cos t``.

    ``a``: ``u0 = x^(-1/4)``, ``f = 0``. ``b``: ``u0 = 0``,
    ``f = e^t (1 + chi_(0,1/2)(x))``. ``c``: ``u0 = 0``, ``f = t^0.5 x (1 - x)``.
    ``zero``: no data at all.
    """
    try:
        info = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}") from None
    return Problem(alpha=alpha, T=T, a=TIME_DEPENDENT, f=info.f, u0=info.u0, label=name)


def preset_defaults(name: str) -> dict:
    info = _PRESETS[name]
    return {"steps": list(info.steps), "n_ref": info.n_ref}


@dataclass(frozen=True)
class StudySpec:
    """One convergence table: every (alpha, t_final) row over the step counts ``steps``."""

    preset: str = "a"
    scheme: str = "corrected"
    alphas: tuple[float, ...] = (0.25, 0.5, 0.75)
    t_finals: tuple[float, ...] = (1.0, 1e-3)
    steps: tuple[int, ...] | None = None
    M: int = 1000
    n_ref: int | None = None
    t_interpretation: str = "final_time"

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; expected one of {', '.join(PRESETS)}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {', '.join(SCHEMES)}")
        if self.t_interpretation not in T_INTERPRETATIONS:
            raise ValueError(
                f"unknown t_interpretation {self.t_interpretation!r}; "
                f"expected one of {', '.join(T_INTERPRETATIONS)}"
            )
        defaults = preset_defaults(self.preset)
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("alphas", tuple(check_alpha(a) for a in self.alphas))
        set_("t_finals", tuple(check_positive(t, "t_final") for t in self.t_finals))
        steps = defaults["steps"] if self.steps is None else self.steps
        set_("steps", tuple(check_count(n, "N", minimum=1) for n in steps))
        set_("n_ref", check_count(defaults["n_ref"] if self.n_ref is None else self.n_ref, "n_ref", minimum=1))
        check_count(self.M, "M", minimum=2)
        if not self.alphas or not self.t_finals or not self.steps:
            raise ValueError("alphas, t_finals and steps must be non-empty")
        if list(self.steps) != sorted(set(self.steps)):
            raise ValueError("steps must be strictly increasing")
        if self.n_ref <= 4 * max(self.steps):
            raise ValueError(
                f"n_ref={self.n_ref} must exceed 4 * max(steps) = {4 * max(self.steps)}"
            )
        if _PRESETS[self.preset].needs_even_mesh and self.M % 2:
            raise ValueError(f"preset {self.preset!r} needs an even M so x = 1/2 is a node, got M={self.M}")
        if self.t_interpretation == "unit_step":
            for t in self.t_finals:
                for n in (*self.steps, self.n_ref):
                    _unit_step_count(n, t)

    def with_(self, **changes) -> StudySpec:
        return replace(self, **changes)


def _unit_step_count(N: int, t_final: float) -> int:
    """Steps of size 1/N needed to land on ``t_final``; must be a positive integer."""
    steps = N * t_final
    k = round(steps)
    if k < 1 or abs(steps - k) > 1e-9 * max(1.0, steps):
        raise ValueError(
            f"with unit-step interpretation, step 1/{N} does not land on t={t_final:g} "
            f"({steps:g} steps)"
        )
    return k


def _run_plan(N: int, t_final: float, interpretation: str) -> tuple[float, int]:
    """(run length T, step count) for a nominal N."""
    if interpretation == "final_time":
        return t_final, N
    k = _unit_step_count(N, t_final)
    return k / N, k


def reference_solution(problem: Problem, mesh: Mesh1D, n_ref: int, t_final: float | None = None,
                       *, interpretation: str = "final_time") -> np.ndarray:
    """Corrected BDF2 solution at ``t_final`` with ``n_ref`` steps on the same mesh."""
    t_final = problem.T if t_final is None else check_positive(t_final, "t_final")
    T, n = _run_plan(n_ref, t_final, interpretation)
    return run_corrected_bdf2(problem.with_(T=T), mesh, n, keep=[]).final


def _error_task(args) -> float:
    preset, scheme, alpha, T, n, M, ref = args
    mesh = Mesh1D(M)
    final = run_scheme(scheme, preset_problem(preset, alpha, T), mesh, n, keep=[]).final
    return l2_norm(mesh, assemble_mass(mesh), final - ref)


def _ref_task(args) -> np.ndarray:
    preset, alpha, t_final, M, n_ref, interpretation = args
    return reference_solution(preset_problem(preset, alpha, t_final), Mesh1D(M), n_ref,
                              t_final, interpretation=interpretation)


def fit_rate(errors: Sequence[tuple[int, float]]) -> list[float]:
    """Observed orders between consecutive ``(N, error)`` pairs.

    ``log(e_k / e_{k+1}) / log(N_{k+1} / N_k)``, i.e. ``log2`` of the error ratio
    for doubling ``N``. Pairs with a zero or non-finite error give ``nan``.

    >>> fit_rate([(10, 4.0), (20, 1.0)])
    [2.0]
    """
    if len(errors) < 2:
        raise ValueError("need at least two (N, error) pairs")
    rates = []
    for (n0, e0), (n1, e1) in zip(errors[:-1], errors[1:]):
        if n1 <= n0:
            raise ValueError("N must increase along the sequence")
        if e0 > 0 and e1 > 0 and math.isfinite(e0) and math.isfinite(e1):
            rates.append(math.log(e0 / e1) / math.log(n1 / n0))
        else:
            rates.append(math.nan)
    return rates


def format_rate(rate: float) -> str:
    return "—" if not math.isfinite(rate) else f"{rate:.2f}"


@dataclass
class ConvergenceReport:
    """Errors per (alpha, t_final, N) for one preset and scheme."""

    spec: StudySpec
    errors: dict[tuple[float, float], list[tuple[int, float]]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def rates(self, alpha: float, t_final: float) -> list[float]:
        return fit_rate(self.errors[(alpha, t_final)])

    def tail_rate(self, alpha: float, t_final: float) -> float:
        return self.rates(alpha, t_final)[-1]

    def error_array(self, alpha: float, t_final: float) -> np.ndarray:
        return np.array([e for _, e in self.errors[(alpha, t_final)]])

    def rows(self) -> Iterable[dict]:
        for (alpha, t_final), pairs in self.errors.items():
            rates = [math.nan, *fit_rate(pairs)]
            for (n, e), r in zip(pairs, rates):
                yield {
                    "preset": self.spec.preset,
                    "scheme": self.spec.scheme,
                    "alpha": alpha,
                    "t_final": t_final,
                    "N": n,
                    "error": e,
                    "rate": r,
                }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["preset", "scheme", "alpha", "t_final", "N", "error", "rate"],
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            row = dict(row)
            row["alpha"] = repr(row["alpha"])
            row["t_final"] = repr(row["t_final"])
            row["error"] = repr(row["error"])
            row["rate"] = "" if not math.isfinite(row["rate"]) else repr(row["rate"])
            writer.writerow(row)
        return buf.getvalue()

    def to_markdown(self) -> str:
        spec = self.spec
        head = ["t_N", "alpha \\ N", *map(str, spec.steps), "rate"]
        lines = [
            f"### preset {spec.preset}, {spec.scheme} scheme (M={spec.M}, reference N={spec.n_ref})",
            "",
            "| " + " | ".join(head) + " |",
            "|" + "|".join("---" for _ in head) + "|",
        ]
        for t_final in spec.t_finals:
            for i, alpha in enumerate(spec.alphas):
                pairs = self.errors[(alpha, t_final)]
                cells = [f"{t_final:g}" if i == 0 else "", f"{alpha:.2f}"]
                cells += [f"{e:.2e}" for _, e in pairs]
                cells.append(format_rate(fit_rate(pairs)[-1]))
                lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def _pool_map(func, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, tasks))


def run_study(spec: StudySpec, *, jobs: int | None = None,
              references: dict | None = None) -> ConvergenceReport:
    """Run every (alpha, t_final, N) combination of ``spec`` and collect errors.

    ``references`` may hold precomputed reference vectors keyed by
    ``(preset, alpha, t_final, M, n_ref, t_interpretation)``; missing ones are
    computed and added to it, so vanilla and corrected studies can share them.
    """
    jobs = (os.cpu_count() or 1) if jobs is None else max(1, int(jobs))
    references = {} if references is None else references
    rows = [(alpha, t_final) for t_final in spec.t_finals for alpha in spec.alphas]

    def key(alpha, t_final):
        return (spec.preset, alpha, t_final, spec.M, spec.n_ref, spec.t_interpretation)

    missing = [r for r in rows if key(*r) not in references]
    ref_tasks = [(spec.preset, a, t, spec.M, spec.n_ref, spec.t_interpretation) for a, t in missing]
    try:
        for r, vec in zip(missing, _pool_map(_ref_task, ref_tasks, jobs)):
            references[key(*r)] = vec
    except Exception as exc:
        raise RuntimeError(f"reference run failed for preset {spec.preset!r}: {exc}") from exc

    tasks, index = [], []
    for alpha, t_final in rows:
        for n in spec.steps:
            T, steps = _run_plan(n, t_final, spec.t_interpretation)
            tasks.append((spec.preset, spec.scheme, alpha, T, steps, spec.M, references[key(alpha, t_final)]))
            index.append((alpha, t_final, n))
    try:
        errs = _pool_map(_error_task, tasks, jobs)
    except Exception as exc:
        raise RuntimeError(f"study run failed for preset {spec.preset!r}, scheme {spec.scheme!r}: {exc}") from exc

    report = ConvergenceReport(spec=spec)
    for (alpha, t_final, n), e in zip(index, errs):
        report.errors.setdefault((alpha, t_final), []).append((n, e))
    return report
