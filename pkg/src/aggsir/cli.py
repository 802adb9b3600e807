"""Command line entry point.

    aggsir run CONFIG
    aggsir study CONFIG --kind refinement|viscosity
    aggsir equilibria --M 1 --alpha 1 --beta 1 --gamma 0.5 [--format csv]
    aggsir preset NAME           # print a bundled preset (fig1, fig2, transport)

CONFIG is a path or the name of a bundled preset.  ``AGGSIR_OUTPUT_ROOT``
relocates relative output directories.  Exit codes: 0 ok, 1 invalid input,
2 solver abort.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config, parse_config
from .diagnostics import DiagnosticSeries, refinement_order, viscosity_study
from .equilibria import analytic_steady_states, center_of_mass, qualifying_gamma
from .errors import AggsirError, ConfigParseError, ConfigValidationError, SolverAbort
from .solver import State, run

log = logging.getLogger("aggsir")

EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 1, 2
PRESETS = ("fig1", "fig2", "transport")


def preset_text(name: str) -> str:
    return resources.files("aggsir").joinpath("presets", f"{name}.cfg").read_text()


def resolve_config(ref: str | Path) -> RunConfig:
    path = Path(ref)
    if path.exists():
        return load_config(path)
    if str(ref) in PRESETS:
        return parse_config(preset_text(str(ref)))
    raise ConfigValidationError("config", f"no such file or preset: {ref}")


def output_dir(cfg: RunConfig, override: str | None = None) -> Path:
    out = Path(override) if override else cfg.output_dir
    root = os.environ.get("AGGSIR_OUTPUT_ROOT")
    if root and not out.is_absolute():
        out = Path(root) / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _num(v) -> str:
    return repr(float(v))


def write_snapshot(path: Path, state: State) -> None:
    grid = state.grid
    coords = [c.ravel() for c in grid.mesh()]
    axes = ["x", "y"][: grid.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(axes + list(state.names) + ["N"])
        cols = coords + [row.ravel() for row in state.data] + [state.total().ravel()]
        for vals in zip(*cols):
            w.writerow([_num(v) for v in vals])


class SnapshotWriter:
    def __init__(self, directory: Path, prefix: str):
        self.directory = directory
        self.prefix = prefix
        self.paths: list[Path] = []

    def __call__(self, state: State, step: int) -> None:
        p = self.directory / f"{self.prefix}_snap_{step:07d}.csv"
        write_snapshot(p, state)
        self.paths.append(p)


def _write_summary(path: Path, items: list[tuple[str, object]], aborted: str | None = None) -> None:
    with open(path, "w") as fh:
        if aborted:
            fh.write(f"ABORTED {aborted}\n")
        for k, v in items:
            fh.write(f"{k} = {_num(v) if isinstance(v, (float, np.floating)) else v}\n")


def _summary_items(cfg, model, grid, init, final, summary) -> list[tuple[str, object]]:
    items = [
        ("prefix", cfg.prefix),
        ("model", type(model.reaction).__name__),
        ("compartments", ",".join(model.compartments)),
        ("alpha", model.alpha),
        ("beta", model.beta),
        ("epsilon", model.epsilon),
        ("domain_lo", ",".join(_num(v) for v in grid.lo)),
        ("domain_hi", ",".join(_num(v) for v in grid.hi)),
        ("cells", ",".join(str(k) for k in grid.n)),
        ("initial_mass", summary.initial_mass),
        ("final_mass", summary.final_mass),
        ("max_rel_mass_drift", summary.max_rel_mass_drift),
        ("min_value", summary.min_value),
        ("min_boundary_margin_cells", summary.min_boundary_margin),
        ("steps", summary.steps),
        ("t_final", summary.t_final),
        ("wall_time_s", summary.wall_time),
        ("backend", summary.backend),
    ]
    for name, v in summary.linf_envelope.items():
        items.append((f"linf_envelope_{name}", v))
    gamma = qualifying_gamma(model)
    if gamma is not None and model.alpha > 0 and grid.dim == 1:
        center = center_of_mass(grid, final.total())
        rep = analytic_steady_states(summary.initial_mass, model.alpha, model.beta, gamma, center)
        items += [
            ("equilibrium.M", rep.M),
            ("equilibrium.gamma", rep.gamma),
            ("equilibrium.r0", rep.r0),
            ("equilibrium.classification", rep.classification),
            ("equilibrium.center", rep.center),
            ("equilibrium.support_lo", rep.support[0]),
            ("equilibrium.support_hi", rep.support[1]),
            ("equilibrium.disease_free_S", rep.disease_free["S"]),
        ]
        if rep.endemic:
            items += [("equilibrium.endemic_S", rep.endemic["S"]), ("equilibrium.endemic_I", rep.endemic["I"])]
    return items


def cmd_run(cfg: RunConfig, out: str | None = None) -> int:
    model, grid, init, solver_cfg = cfg.build()
    directory = output_dir(cfg, out)
    snaps = SnapshotWriter(directory, cfg.prefix)
    series = DiagnosticSeries(model.compartments)
    summary_path = directory / f"{cfg.prefix}_summary.txt"
    try:
        final, summary = run(model, init, solver_cfg, sinks=[snaps, series])
    except SolverAbort as exc:
        series.to_csv(directory / f"{cfg.prefix}_diagnostics.csv")
        last = exc.state if exc.state is not None else init
        _write_summary(summary_path, _summary_items(cfg, model, grid, init, last, exc.summary), aborted=str(exc))
        log.error("solver aborted: %s", exc)
        return EXIT_ABORT
    series.to_csv(directory / f"{cfg.prefix}_diagnostics.csv")
    _write_summary(summary_path, _summary_items(cfg, model, grid, init, final, summary))
    print(f"wrote {len(snaps.paths)} snapshots, diagnostics and summary to {directory}")
    return EXIT_OK


def cmd_study(cfg: RunConfig, kind: str, out: str | None = None) -> int:
    model, grid, init, solver_cfg = cfg.build()
    directory = output_dir(cfg, out)
    study = cfg.section(("study",))
    if kind == "viscosity":
        eps = study.get("eps", [1e-2, 1e-3, 1e-4])
        res = viscosity_study(model, init, solver_cfg, eps)
        path = directory / f"{cfg.prefix}_viscosity.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps"] + [f"l2_{n}" for n in res.names])
            for row in res.rows():
                w.writerow([_num(v) for v in row])
        verdict = "monotone-decreasing" if res.monotone else "not-monotone"
        slopes = ",".join(_num(s) for s in res.slopes())
        _write_summary(directory / f"{cfg.prefix}_viscosity_verdict.txt", [("verdict", verdict), ("slopes", slopes)])
        print(f"viscosity study: {verdict} (log-log slopes {slopes})")
        return EXIT_OK
    if kind == "refinement":
        dx = study.get("dx", [grid.dx[0], grid.dx[0] / 2, grid.dx[0] / 4])
        lo = study.get("lo", list(grid.lo))
        hi = study.get("hi", list(grid.hi))
        lo = lo[0] if len(lo) == 1 else lo
        hi = hi[0] if len(hi) == 1 else hi

        def init_fn(g):
            return cfg.build_state(g)

        res = refinement_order(model, init_fn, solver_cfg, dx, lo, hi)
        path = directory / f"{cfg.prefix}_refinement.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dx", "l1_diff_to_next", "order"])
            for row in res.rows():
                w.writerow([_num(v) if v != "" else "" for v in row])
        _write_summary(directory / f"{cfg.prefix}_refinement_verdict.txt", [("verdict", res.verdict), ("order", res.order)])
        print(f"refinement study: {res.verdict}")
        return EXIT_OK
    raise ConfigValidationError("study.kind", f"unknown study {kind!r}")


def cmd_equilibria(M: float, alpha: float, beta: float, gamma: float, fmt: str = "text", center: float = 0.0) -> int:
    rep = analytic_steady_states(M, alpha, beta, gamma, center)
    endemic_s = rep.endemic["S"] if rep.endemic else ""
    endemic_i = rep.endemic["I"] if rep.endemic else ""
    if fmt == "csv":
        w = csv.writer(sys.stdout)
        w.writerow(["M", "alpha", "beta", "gamma", "r0", "classification", "support_lo", "support_hi",
                    "disease_free_S", "endemic_S", "endemic_I"])
        w.writerow([_num(rep.M), _num(rep.alpha), _num(rep.beta), _num(rep.gamma), _num(rep.r0), rep.classification,
                    _num(rep.support[0]), _num(rep.support[1]), _num(rep.disease_free["S"]),
                    _num(endemic_s) if rep.endemic else "", _num(endemic_i) if rep.endemic else ""])
        return EXIT_OK
    print(f"R0 = {rep.r0:g}  ({rep.classification})")
    print(f"support = [{rep.support[0]:g}, {rep.support[1]:g}]  (width {rep.gamma:g})")
    print(f"disease-free: S = {rep.disease_free['S']:g}, I = 0")
    if rep.endemic:
        print(f"endemic:      S = {endemic_s:g}, I = {endemic_i:g}")
    else:
        print("endemic:      none (requires R0 > 1)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aggsir", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides [output] directory)")

    s = sub.add_parser("study", help="refinement or vanishing-viscosity study")
    s.add_argument("config")
    s.add_argument("--kind", required=True, choices=["refinement", "viscosity"])
    s.add_argument("--out")

    e = sub.add_parser("equilibria", help="closed-form steady states")
    e.add_argument("--M", type=float, required=True)
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--beta", type=float, required=True)
    e.add_argument("--gamma", type=float, required=True)
    e.add_argument("--center", type=float, default=0.0)
    e.add_argument("--format", choices=["text", "csv"], default="text")

    pr = sub.add_parser("preset", help="print a bundled preset")
    pr.add_argument("name", choices=PRESETS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return cmd_run(resolve_config(args.config), args.out)
        if args.command == "study":
            return cmd_study(resolve_config(args.config), args.kind, args.out)
        if args.command == "equilibria":
            return cmd_equilibria(args.M, args.alpha, args.beta, args.gamma, args.format, args.center)
        if args.command == "preset":
            sys.stdout.write(preset_text(args.name))
            return EXIT_OK
    except (ConfigParseError, ConfigValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverAbort as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except AggsirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
