"""Command-line entry point.

::

    fictdim solve|verify|converge CONFIG [--out DIR] [--mesh M] [--grading G]
                                         [--delta-min X] [--seed S]

Exit codes: 0 success, 1 configuration/validation error, 2 solver failure,
3 I/O error, 4 a verification check failed.

The config file is INI-style::

    [problem]
    p = 3
    q = 2
    N = 2
    R = 1
    g = 0
    f = [[1, 0]]        # list of [coefficient, exponent] pairs

    [mesh]
    M = 256
    grading = 2

    [solver]            # any SolverConfig field
    delta_min = 1e-10

    [verify]
    battery = all       # or a comma-separated list
    trials = 20

    [converge]
    levels = 4
    M0 = 32
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .batteries import BATTERIES, run_battery
from .params import DomainError, ProblemSpec, SourceTerm
from .solver import DegenerateJacobian, NonConvergence, SolverConfig, refine_and_solve, solve
from .viscosity import pointwise_residual
from .weighted import Mesh1D, write_csv

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3, 4

log = logging.getLogger("fictdim")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: ProblemSpec
    M: int = 256
    grading: float = 2.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    options: dict = field(default_factory=dict)


def _key_line(text: str, section: str, key: str) -> int | None:
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].split(";")[0].strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and "=" in line and line.split("=")[0].strip() == key:
            return n
    return None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse config text; errors carry ``source:line``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    def where(section, key):
        n = _key_line(text, section, key)
        return f"{source}:{n}" if n else source

    def get(section, key, conv, default=None):
        if not cp.has_option(section, key):
            if default is None:
                raise ConfigError(f"{source}: missing key '{key}' in [{section}]")
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where(section, key)}: bad value for {key} = {raw!r}: {exc}") from exc

    if not cp.has_section("problem"):
        raise ConfigError(f"{source}: missing [problem] section")

    def parse_source(raw):
        terms = json.loads(raw)
        if not isinstance(terms, list) or not all(isinstance(t, list) and len(t) == 2 for t in terms):
            raise ValueError("f must be a list of [coefficient, exponent] pairs")
        return SourceTerm.monomial_sum(terms)

    def to_int(raw):
        x = float(raw)
        if x != int(x):
            raise ValueError("expected an integer")
        return int(x)

    vals = {}
    for key, conv in (("p", float), ("q", float), ("N", to_int), ("R", float)):
        vals[key] = get("problem", key, conv)
    vals["g"] = get("problem", "g", float, 0.0)
    vals["f"] = get("problem", "f", parse_source)
    try:
        problem = ProblemSpec(**vals)
    except DomainError as exc:
        msg = str(exc)
        key = msg.split()[0]
        raise ConfigError(f"{where('problem', key)}: {msg}") from exc

    M = get("mesh", "M", to_int, 256) if cp.has_section("mesh") else 256
    grading = get("mesh", "grading", float, 2.0) if cp.has_section("mesh") else 2.0
    if M < 2:
        raise ConfigError(f"{where('mesh', 'M')}: M must be >= 2")
    if grading < 1:
        raise ConfigError(f"{where('mesh', 'grading')}: grading must be >= 1")

    solver_kwargs = {}
    if cp.has_section("solver"):
        names = {f.name for f in dataclasses.fields(SolverConfig)}
        for key in cp.options("solver"):
            if key not in names:
                raise ConfigError(f"{where('solver', key)}: unknown solver key '{key}'")
            conv = to_int if key == "max_newton" else float
            solver_kwargs[key] = get("solver", key, conv)
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    options = {}
    for section in ("verify", "converge"):
        if cp.has_section(section):
            options[section] = dict(cp.items(section))
    return RunConfig(problem, M, grading, solver, options)


def _load(args) -> RunConfig:
    path = Path(args.config)
    text = path.read_text()
    run = parse_config(text, str(path))
    if args.mesh is not None:
        run.M = args.mesh
    if args.grading is not None:
        run.grading = args.grading
    if args.delta_min is not None:
        run.solver = dataclasses.replace(run.solver, delta_min=args.delta_min)
    return run


def _seed(args) -> int:
    env = os.environ.get("FICTDIM_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_solve(args) -> int:
    run = _load(args)
    mesh = Mesh1D.graded(run.problem.R, run.M, run.grading)
    report = solve(run.problem, mesh, run.solver)
    v = report.solution
    interior = (mesh.nodes > 0) & (mesh.nodes < run.problem.R)
    idx = np.nonzero(interior)[0][2:-2]
    r = mesh.nodes[idx]
    res = pointwise_residual(v, r, run.problem)
    out = Path(args.out)
    try:
        _write(out, "solution.csv", v.to_csv())
        _write(out, "report.txt", report.summary())
        _write(out, "residual.csv", write_csv({"r": r, "residual": res}))
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(report.summary(), end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    run = _load(args)
    opts = run.options.get("verify", {})
    names = args.battery or opts.get("battery", "all")
    names = list(BATTERIES) if names == "all" else [n.strip() for n in names.split(",")]
    for n in names:
        if n not in BATTERIES:
            raise ConfigError(f"unknown battery '{n}'; choose from {', '.join(BATTERIES)} or all")
    try:
        trials = int(opts["trials"]) if "trials" in opts else None
    except ValueError as exc:
        raise ConfigError(f"bad value for trials: {exc}") from exc
    rng = np.random.default_rng(_seed(args))
    ok = True
    for name in names:
        try:
            checks = run_battery(name, run.problem, rng, run.solver, run.M, trials)
        except DomainError as exc:
            print(f"SKIP {name}: {exc}")
            continue
        for c in checks:
            print(c.line())
            ok &= c.passed
    return EXIT_OK if ok else EXIT_CHECK


def cmd_converge(args) -> int:
    run = _load(args)
    opts = run.options.get("converge", {})
    levels = args.levels if args.levels is not None else int(opts.get("levels", 4))
    M0 = int(opts.get("M0", 32))
    if levels < 2:
        raise ConfigError(f"levels must be >= 2, got {levels}")
    rows = refine_and_solve(run.problem, levels, run.solver, M0=M0, grading=run.grading)
    text = "M,error,rate\n" + "".join(
        f"{row.M},{row.error:.17g},{'' if row.rate is None else format(row.rate, '.17g')}\n"
        for row in rows)
    try:
        _write(Path(args.out), "convergence.csv", text)
    except OSError as exc:
        print(f"error: cannot write to {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fictdim", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (("solve", cmd_solve), ("verify", cmd_verify), ("converge", cmd_converge)):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out", default="fictdim-out")
        p.add_argument("--mesh", type=int)
        p.add_argument("--grading", type=float)
        p.add_argument("--delta-min", type=float)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            p.add_argument("--battery")
        if name == "converge":
            p.add_argument("--levels", type=int)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NonConvergence, DegenerateJacobian) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
