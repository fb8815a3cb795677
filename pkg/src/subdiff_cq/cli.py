"""Command-line front end.

Subcommands: ``weights``, ``solve``, ``study`` and ``verify``. Exit status is 0 on
success, 1 for usage or configuration errors, 2 for numerical failures and 3
when ``verify`` finds a failing check.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cq import CqMethod, generate_weights
from .experiments import PRESETS, T_INTERPRETATIONS, StudySpec, preset_problem, run_study
from .fem1d import EllipticityError, Mesh1D, SingularMatrixError
from .oracle import MittagLefflerError, TruncationError
from .stepper import SCHEMES, run_scheme

log = logging.getLogger("subdiff_cq")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
_NUMERIC_ERRORS = (SingularMatrixError, EllipticityError, MittagLefflerError, TruncationError,
                   ArithmeticError, RuntimeError)


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    studies: tuple[StudySpec, ...]
    output_dir: str = "results"
    t_interpretation: str = "final_time"
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    verbosity: int = 0

    def __post_init__(self) -> None:
        if not self.studies:
            raise ConfigError("no study specified")
        if self.t_interpretation not in T_INTERPRETATIONS:
            raise ConfigError(f"t_interpretation must be one of {', '.join(T_INTERPRETATIONS)}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        object.__setattr__(self, "studies", tuple(
            s if s.t_interpretation == self.t_interpretation
            else s.with_(t_interpretation=self.t_interpretation)
            for s in self.studies
        ))


_RUN_KEYS = {"output_dir", "t_interpretation", "jobs", "verbosity"}
_STUDY_KEYS = {"preset", "scheme", "alphas", "t_finals", "steps", "m", "n_ref"}


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected a list of numbers, got {text!r}") from None


def _ints(text: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected a list of integers, got {text!r}") from None


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _study_from_mapping(name: str, values: dict) -> StudySpec:
    unknown = set(values) - _STUDY_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in [study {name}]")
    kwargs = {}
    if "preset" in values:
        kwargs["preset"] = values["preset"].strip()
    if "scheme" in values:
        kwargs["scheme"] = values["scheme"].strip()
    if "alphas" in values:
        kwargs["alphas"] = _floats(values["alphas"], "alphas")
    if "t_finals" in values:
        kwargs["t_finals"] = _floats(values["t_finals"], "t_finals")
    if "steps" in values:
        kwargs["steps"] = _ints(values["steps"], "steps")
    if "m" in values:
        kwargs["M"] = _int(values["m"], "M")
    if "n_ref" in values:
        kwargs["n_ref"] = _int(values["n_ref"], "n_ref")
    try:
        return StudySpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[study {name}]: {exc}") from None


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse an INI-style run configuration; ``overrides`` (from flags) win."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None

    run = {}
    studies = []
    for section in parser.sections():
        values = dict(parser[section])
        if section == "run":
            unknown = set(values) - _RUN_KEYS
            if unknown:
                raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in [run]")
            run = values
        elif section.startswith("study"):
            studies.append((section[5:].strip() or str(len(studies)), values))
        else:
            raise ConfigError(f"unknown section [{section}]")

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    study_over = {k: v for k, v in overrides.items() if k in _STUDY_KEYS}
    if study_over and not studies:
        studies.append(("cli", {}))
    specs = []
    for name, values in studies:
        values = {**values, **study_over}
        specs.append(_study_from_mapping(name, values))

    kwargs = {}
    merged_run = {**run, **{k: v for k, v in overrides.items() if k in _RUN_KEYS}}
    if "output_dir" in merged_run:
        kwargs["output_dir"] = str(merged_run["output_dir"])
    if "t_interpretation" in merged_run:
        kwargs["t_interpretation"] = str(merged_run["t_interpretation"]).strip()
    if "jobs" in merged_run:
        kwargs["jobs"] = _int(str(merged_run["jobs"]), "jobs")
    if "verbosity" in merged_run:
        kwargs["verbosity"] = _int(str(merged_run["verbosity"]), "verbosity")
    return RunConfig(studies=tuple(specs), **kwargs)


def parse_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> RunConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, overrides)


def dump_config(cfg: RunConfig) -> str:
    """Effective configuration in the same format :func:`parse_config_text` reads."""
    lines = [
        "[run]",
        f"output_dir = {cfg.output_dir}",
        f"t_interpretation = {cfg.t_interpretation}",
        f"jobs = {cfg.jobs}",
        f"verbosity = {cfg.verbosity}",
    ]
    for i, spec in enumerate(cfg.studies):
        lines += [
            "",
            f"[study {i}-{spec.preset}-{spec.scheme}]",
            f"preset = {spec.preset}",
            f"scheme = {spec.scheme}",
            "alphas = " + ", ".join(repr(a) for a in spec.alphas),
            "t_finals = " + ", ".join(repr(t) for t in spec.t_finals),
            "steps = " + ", ".join(str(n) for n in spec.steps),
            f"M = {spec.M}",
            f"n_ref = {spec.n_ref}",
        ]
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _alpha_list(text: str) -> tuple[float, ...]:
    return _floats(text, "alpha")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subdiff-cq", description="BDF2 convolution quadrature for 1D subdiffusion")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("weights", help="print convolution quadrature weights")
    w.add_argument("--alpha", type=float, required=True)
    w.add_argument("--method", choices=[m.value for m in CqMethod], default="bdf2")
    w.add_argument("-n", type=int, required=True, help="highest weight index")

    s = sub.add_parser("solve", help="single run; write the final snapshot")
    s.add_argument("--preset", choices=PRESETS, required=True)
    s.add_argument("--scheme", choices=SCHEMES, default="corrected")
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--T", type=float, default=1.0, dest="T")
    s.add_argument("-N", type=int, default=100)
    s.add_argument("-M", type=int, default=1000)
    s.add_argument("-o", "--output", default="-", help="CSV path, '-' for stdout")

    st = sub.add_parser("study", help="convergence study; writes CSV and Markdown tables")
    st.add_argument("--config", help="INI run configuration")
    st.add_argument("--preset", choices=PRESETS)
    st.add_argument("--scheme", choices=SCHEMES)
    st.add_argument("--alphas", type=_alpha_list)
    st.add_argument("--t-finals", type=_alpha_list, dest="t_finals")
    st.add_argument("--steps", type=lambda t: _ints(t, "steps"))
    st.add_argument("-M", type=int, dest="m")
    st.add_argument("--n-ref", type=int, dest="n_ref")
    st.add_argument("--t-interpretation", choices=T_INTERPRETATIONS, dest="t_interpretation")
    st.add_argument("-o", "--output-dir", dest="output_dir")
    st.add_argument("-j", "--jobs", type=int)

    v = sub.add_parser("verify", help="oracle-equivalence and invariant checks")
    v.add_argument("--only", nargs="+", metavar="CHECK", help="run a subset of checks")
    v.add_argument("--list", action="store_true", help="list available checks")
    return p


def _cmd_weights(args) -> int:
    try:
        w = generate_weights(args.alpha, args.method, args.n)
    except (TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for value in w.b:
        print(f"{value:.17g}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    try:
        problem = preset_problem(args.preset, args.alpha, args.T)
        mesh = Mesh1D(args.M)
    except (TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    traj = run_scheme(args.scheme, problem, mesh, args.N, keep=[])
    u = np.r_[0.0, traj.final, 0.0]
    rows = "x,u\n" + "".join(f"{x!r},{val!r}\n" for x, val in zip(mesh.nodes.tolist(), u.tolist()))
    if args.output == "-":
        sys.stdout.write(rows)
    else:
        Path(args.output).write_text(rows)
        log.info("wrote %s", args.output)
    return EXIT_OK


def write_study_outputs(cfg: RunConfig, reports: list, out: Path, elapsed: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    csv_parts = [r.to_csv() for r in reports]
    header = csv_parts[0].splitlines(keepends=True)[0]
    body = "".join("".join(p.splitlines(keepends=True)[1:]) for p in csv_parts)
    (out / "results.csv").write_text(header + body)
    (out / "tables.md").write_text("\n".join(r.to_markdown() for r in reports))
    (out / "config.effective").write_text(dump_config(cfg))
    meta = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "runtime_seconds": round(elapsed, 3),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")


def _cmd_study(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("preset", "scheme", "alphas", "t_finals", "steps", "m", "n_ref",
                  "t_interpretation", "output_dir", "jobs")}
    # list-valued flags arrive parsed; turn them back into config text
    for key in ("alphas", "t_finals", "steps"):
        if overrides[key] is not None:
            overrides[key] = " ".join(map(str, overrides[key]))
    for key in ("m", "n_ref", "jobs"):
        if overrides[key] is not None:
            overrides[key] = str(overrides[key])
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    start = time.perf_counter()
    references: dict = {}
    reports = []
    for spec in cfg.studies:
        log.info("study preset=%s scheme=%s", spec.preset, spec.scheme)
        reports.append(run_study(spec, jobs=cfg.jobs, references=references))
    write_study_outputs(cfg, reports, Path(cfg.output_dir), time.perf_counter() - start)
    for r in reports:
        print(r.to_markdown())
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import CHECKS, run_checks

    if args.list:
        print("\n".join(CHECKS))
        return EXIT_OK
    names = args.only
    if names:
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            print(f"error: unknown check {unknown[0]!r}", file=sys.stderr)
            return EXIT_USAGE
    results = run_checks(names)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"weights": _cmd_weights, "solve": _cmd_solve,
               "study": _cmd_study, "verify": _cmd_verify}[args.command]
    try:
        return handler(args)
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
