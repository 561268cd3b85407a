"""Command-line front end: configuration, solves, and the verify suite.

Subcommands
-----------
``solve-frequency``
    One Laplace-domain solve; writes trace CSV, JSON sidecar, figure.
``solve-time``
    Convolution-quadrature march; writes per-step trace CSV, probe-point
    field CSV, JSON sidecar, figure.
``verify``
    Runs verification probes and writes a schema-versioned JSON report,
    a terminal table, and a margin figure.
``mesh-info``
    Structural validation report for a builtin or file mesh.
``export``
    Writes a builtin mesh (and optionally its single-trace constraint
    map) to disk.

Configuration is a single INI-style file of ``[section]`` blocks with
``key = value`` lines, overridable per run with ``--set section.key=value``
and the dedicated flags below; unknown sections or keys are rejected by
name.  Exit codes: 0 success, 1 probe or validation failure, 2
configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import report as report_mod
from .cq import cq_march, reconstruct_time_field
from .mesh import (
    MaterialParams,
    SurfaceMesh,
    generate_builtin,
    load_mesh,
    save_mesh,
    validate_mesh,
)
from .probes import SUITE_PROBES, run_suite
from .signals import (
    CausalPulse,
    CausalRamp,
    point_source_field,
    polar_cap_bump,
)
from .solver import (
    NumericsError,
    TransmissionProblem,
    reconstruct_field,
    solve_frequency,
)
from .tracespace import classify_dofs, export_constraint_map
from .probes import _manufactured_data, _trace_error  # shared construction

__all__ = ["ConfigError", "RunConfig", "load_config", "main"]

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """A configuration problem: unknown key, bad value, bad combination."""


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

def _parse_complex(text: str) -> complex:
    """Complex literal accepting both ``2+1i`` and ``2+1j`` spellings."""
    try:
        return complex(text.strip().replace("i", "j").replace("I", "j"))
    except ValueError:
        raise ConfigError(f"not a complex number: {text!r}") from None


def _parse_builtin(text: str) -> Tuple[str, int]:
    name, sep, level = text.partition(":")
    if not sep or not name:
        raise ConfigError(
            f"builtin geometry must look like 'icosphere:3', got {text!r}"
        )
    try:
        return name.strip(), int(level)
    except ValueError:
        raise ConfigError(f"builtin level must be an integer: {text!r}") from None


def _parse_points(text: str) -> np.ndarray:
    """Probe points: semicolon-separated ``x,y,z`` triples."""
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 3:
            raise ConfigError(f"probe point needs three coordinates: {chunk!r}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise ConfigError(f"bad probe point coordinate in {chunk!r}") from None
    if not rows:
        raise ConfigError("probe point list is empty")
    return np.asarray(rows)


def _parse_names(text: str) -> List[str]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    if not names:
        raise ConfigError("probe suite list is empty")
    return names


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise ConfigError(f"value must be positive, got {text!r}")
    return value


# section -> key -> (converter, default); single source of schema truth
CONFIG_SCHEMA: Dict[str, Dict[str, Tuple[Callable[[str], object], object]]] = {
    "geometry": {
        "builtin": (_parse_builtin, ("icosphere", 2)),
        "file": (str, None),
    },
    "materials": {
        "a1": (_positive_float, 1.0),
        "p1": (_positive_float, 1.0),
        "a2": (_positive_float, 1.0),
        "p2": (_positive_float, 1.0),
    },
    "signal": {
        "family": (str, "point-source"),
        "source": (lambda t: tuple(_parse_points(t)[0]), (0.0, 0.0, 2.0)),
        "onset": (float, 0.0),
        "decay": (_positive_float, 0.15),
        "power": (int, 8),
        "amplitude": (float, 1.0),
        "ramp": (_positive_float, 1.0),
        "cap_angle": (_positive_float, np.pi / 3.0),
    },
    "frequency": {
        "s": (_parse_complex, 2.0 + 1.0j),
        "manufactured": (str, None),
    },
    "time": {
        "horizon": (_positive_float, 2.0),
        "n_steps": (int, 32),
        "scheme": (str, "BDF2"),
        "oversample": (int, 1),
        "onset_steps": (int, 0),
    },
    "probes": {
        "points": (_parse_points, None),
        "subdomain": (int, None),
    },
    "verify": {
        "suite": (_parse_names, ["all"]),
        "level": (int, None),
        "seed": (int, None),
    },
    "output": {
        "dir": (str, "wavebem-out"),
    },
}

# dedicated flags mapped onto schema entries (one validation path)
_FLAG_TARGETS = {
    "builtin": ("geometry", "builtin"),
    "mesh": ("geometry", "file"),
    "s": ("frequency", "s"),
    "manufactured": ("frequency", "manufactured"),
    "horizon": ("time", "horizon"),
    "steps": ("time", "n_steps"),
    "scheme": ("time", "scheme"),
    "points": ("probes", "points"),
    "suite": ("verify", "suite"),
    "level": ("verify", "level"),
    "seed": ("verify", "seed"),
    "out": ("output", "dir"),
}


@dataclass
class RunConfig:
    """Validated, typed run configuration with documented defaults."""

    values: Dict[Tuple[str, str], object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for section, keys in CONFIG_SCHEMA.items():
            for key, (_conv, default) in keys.items():
                self.values.setdefault((section, key), default)

    def get(self, section: str, key: str):
        return self.values[(section, key)]

    def put(self, section: str, key: str, raw: str) -> None:
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section: [{section}]")
        if key not in CONFIG_SCHEMA[section]:
            raise ConfigError(f"unknown config key: {section}.{key}")
        converter = CONFIG_SCHEMA[section][key][0]
        try:
            self.values[(section, key)] = converter(raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"bad value for {section}.{key}: {raw!r} ({exc})"
            ) from None

    def echo(self) -> Dict[str, Dict[str, object]]:
        """Plain representation of every non-default setting, for sidecars."""
        out: Dict[str, Dict[str, object]] = {}
        for (section, key), value in sorted(self.values.items()):
            default = CONFIG_SCHEMA[section][key][1]
            same = (
                np.array_equal(value, default)
                if isinstance(value, np.ndarray)
                else value == default
            )
            if same:
                continue
            if isinstance(value, np.ndarray):
                value = value.tolist()
            elif isinstance(value, complex):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            out.setdefault(section, {})[key] = value
        return out


def load_config(
    path: Optional[str], assignments: Sequence[str] = ()
) -> RunConfig:
    """Parse the config file (if any) and apply ``--set`` assignments."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                cfg.put(section, key, raw)
    for item in assignments:
        target, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set needs section.key=value, got {item!r}")
        section, dot, key = target.strip().partition(".")
        if not dot:
            raise ConfigError(f"--set needs section.key=value, got {item!r}")
        cfg.put(section, key.strip(), raw.strip())
    return cfg


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> None:
    for flag, (section, key) in _FLAG_TARGETS.items():
        raw = getattr(args, flag.replace("-", "_"), None)
        if raw is not None:
            cfg.put(section, key, raw)


# ---------------------------------------------------------------------------
# shared constructions
# ---------------------------------------------------------------------------

def _build_mesh(cfg: RunConfig) -> SurfaceMesh:
    file_path = cfg.get("geometry", "file")
    if file_path is not None:
        return load_mesh(file_path)
    name, level = cfg.get("geometry", "builtin")
    return generate_builtin(name, level)


def _build_material(cfg: RunConfig) -> MaterialParams:
    return MaterialParams(
        a1=cfg.get("materials", "a1"),
        p1=cfg.get("materials", "p1"),
        a2=cfg.get("materials", "a2"),
        p2=cfg.get("materials", "p2"),
    )


def _mesh_meta(mesh: SurfaceMesh) -> Dict[str, object]:
    return {
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
        "subdomains": [int(j) for j in mesh.subdomains_present()],
        "parts": {
            p: int(np.sum(mesh.part == p)) for p in ("D", "N", "I", "J")
        },
    }


def _spatial_profile(cfg: RunConfig, points: np.ndarray) -> np.ndarray:
    """Spatial factor of the named boundary-data family at given points."""
    family = cfg.get("signal", "family")
    if family == "point-source":
        source = np.asarray(cfg.get("signal", "source"), dtype=float)
        radii = np.linalg.norm(points - source, axis=1)
        if np.any(radii <= 0.0):
            raise ConfigError("signal source lies on the boundary")
        return 1.0 / (4.0 * np.pi * radii)
    if family == "cap-bump":
        # the bump is a polar-angle profile; at the origin (an interface
        # vertex of split geometries, where Dirichlet data is never read)
        # the angle is undefined and the value is immaterial
        out = np.zeros(len(points))
        away = np.linalg.norm(points, axis=1) > 1e-12
        out[away] = polar_cap_bump(
            points[away], cap_angle=cfg.get("signal", "cap_angle")
        )
        return out
    raise ConfigError(f"unknown signal family: {family!r}")


def _time_window(cfg: RunConfig):
    """Time factor of the named family (causal by construction)."""
    family = cfg.get("signal", "family")
    if family == "point-source":
        return CausalPulse(
            onset=cfg.get("signal", "onset"),
            decay=cfg.get("signal", "decay"),
            power=cfg.get("signal", "power"),
            amplitude=cfg.get("signal", "amplitude"),
        )
    if family == "cap-bump":
        return CausalRamp(
            onset=cfg.get("signal", "onset"),
            ramp=cfg.get("signal", "ramp"),
            amplitude=cfg.get("signal", "amplitude"),
        )
    raise ConfigError(f"unknown signal family: {family!r}")


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.get("output", "dir"))
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_solve_frequency(cfg: RunConfig) -> int:
    mesh = _build_mesh(cfg)
    mat = _build_material(cfg)
    s = cfg.get("frequency", "s")
    manufactured = cfg.get("frequency", "manufactured")
    out = _out_dir(cfg)

    exact = None
    if manufactured is not None:
        if manufactured != "point-source":
            raise ConfigError(
                f"unknown manufactured family: {manufactured!r}"
            )
        cls, g, d_n, d_i, exact = _manufactured_data(
            mesh, mat, s, cfg.get("signal", "source")
        )
    else:
        cls = classify_dofs(mesh)
        g = np.zeros(mesh.n_vertices, dtype=complex)
        for surf in cls.surfaces:
            g[surf.global_vertex_ids] = _spatial_profile(cfg, surf.vertices)
        d_n = np.zeros(mesh.n_triangles, dtype=complex)
        d_i = np.zeros(mesh.n_triangles, dtype=complex)

    result = solve_frequency(
        s, mesh, mat, g_dirichlet=g, d_neumann=d_n, d_impedance=d_i,
        with_energy=True,
    )
    meta: Dict[str, object] = {
        "schema": report_mod.SCHEMA_VERSION,
        "command": "solve-frequency",
        "s": str(complex(s)),
        "mesh": _mesh_meta(mesh),
        "residual": result.residual,
        "stats": {k: float(v) for k, v in result.stats.items()},
        "config": cfg.echo(),
    }
    if exact is not None:
        meta["manufactured_trace_error"] = _trace_error(
            cls, result.traces, exact
        )
    report_mod.write_frequency_csv(out / "traces.csv", result)
    report_mod.figure_frequency(out / "traces.png", result)

    points = cfg.get("probes", "points")
    if points is not None:
        sub = cfg.get("probes", "subdomain")
        values = reconstruct_field(
            mesh, mat, result.traces, s, points, subdomain=sub
        )
        meta["probe_points"] = {
            "points": points.tolist(),
            "values": [[v.real, v.imag] for v in values],
        }
    report_mod.write_json(
        out / "solve.json",
        json.dumps(meta, indent=2, sort_keys=True) + "\n",
    )
    print(f"solved s = {complex(s):g}: residual {result.residual:.3e}")
    if "manufactured_trace_error" in meta:
        print(
            "manufactured trace error: "
            f"{meta['manufactured_trace_error']:.6g}"
        )
    print(f"artifacts in {out}")
    return 0


def _cmd_solve_time(cfg: RunConfig) -> int:
    mesh = _build_mesh(cfg)
    mat = _build_material(cfg)
    out = _out_dir(cfg)
    horizon = cfg.get("time", "horizon")
    n_steps = cfg.get("time", "n_steps")
    dt = horizon / n_steps
    window = _time_window(cfg)

    cls = classify_dofs(mesh)
    profile = np.zeros(mesh.n_vertices)
    for surf in cls.surfaces:
        profile[surf.global_vertex_ids] = _spatial_profile(cfg, surf.vertices)

    def g_dirichlet(t: float) -> np.ndarray:
        return profile * window(t)

    problem = TransmissionProblem(
        mesh=mesh,
        mat=mat,
        horizon=horizon,
        dt=dt,
        g_dirichlet=g_dirichlet,
        scheme=cfg.get("time", "scheme"),
    )
    result = cq_march(
        problem, contour_oversample=cfg.get("time", "oversample")
    )
    report_mod.write_march_csv(out / "march.csv", result)

    points = cfg.get("probes", "points")
    series = None
    if points is not None:
        series = reconstruct_time_field(
            result, mesh, mat, points, subdomain=cfg.get("probes", "subdomain")
        )
        report_mod.write_march_fields_csv(
            out / "fields.csv", result.times, points, series
        )
    report_mod.figure_march(out / "march.png", result, points, series)

    meta = {
        "schema": report_mod.SCHEMA_VERSION,
        "command": "solve-time",
        "scheme": result.scheme,
        "dt": result.dt,
        "n_steps": n_steps,
        "horizon": horizon,
        "contour_radius": result.lam,
        "n_frequency_solves": int(result.stats.get("n_solves", 0)),
        "max_residual": result.max_residual,
        "mesh": _mesh_meta(mesh),
        "config": cfg.echo(),
    }
    report_mod.write_json(
        out / "march.json", json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"marched {n_steps} steps of {result.scheme} (dt = {dt:g}): "
        f"max solve residual {result.max_residual:.3e}"
    )
    print(f"artifacts in {out}")
    return 0


def _verify_overrides(cfg: RunConfig) -> Dict[str, Dict[str, object]]:
    """Per-probe keyword overrides implied by the generic verify knobs."""
    import inspect

    overrides: Dict[str, Dict[str, object]] = {}
    level = cfg.get("verify", "level")
    seed = cfg.get("verify", "seed")
    for name, fn in SUITE_PROBES.items():
        params = inspect.signature(fn).parameters
        probe_kw: Dict[str, object] = {}
        if level is not None and "level" in params:
            probe_kw["level"] = level
        if level is not None and "compare_level" in params:
            probe_kw["compare_level"] = level + 1
        if seed is not None and "seed" in params:
            probe_kw["seed"] = seed
        if probe_kw:
            overrides[name] = probe_kw
    return overrides


def _cmd_verify(cfg: RunConfig) -> int:
    names = cfg.get("verify", "suite")
    out = _out_dir(cfg)
    reports = run_suite(names, overrides=_verify_overrides(cfg))
    meta = {
        "suite": list(names),
        "seed": cfg.get("verify", "seed"),
        "config": cfg.echo(),
    }
    report_mod.write_json(
        out / "report.json", report_mod.reports_to_json(reports, meta)
    )
    report_mod.figure_suite(out / "report.png", reports)
    for rep in reports:
        if rep.probe == "cq" and "self_differences" in rep.quantities:
            steps = rep.parameters["order_steps"]
            horizon = rep.parameters["horizon"]
            report_mod.figure_convergence(
                out / "cq-order.png",
                [horizon / n for n in steps[1:]],
                rep.quantities["self_differences"],
                xlabel="time step",
                title="BDF2 self-convergence",
            )
        if rep.probe == "manufactured" and "errors" in rep.quantities:
            report_mod.figure_convergence(
                out / "manufactured-order.png",
                [0.5 ** lvl for lvl in rep.parameters["levels"]],
                rep.quantities["errors"],
                xlabel="mesh size (relative)",
                title="manufactured-solution convergence",
            )
    sys.stdout.write(report_mod.render_table(reports))
    print(f"artifacts in {out}")
    return 0 if all(r.passed for r in reports) else 1


def _cmd_mesh_info(cfg: RunConfig) -> int:
    mesh = _build_mesh(cfg)
    rep = validate_mesh(mesh)
    for line in rep.lines():
        print(line)
    return 0 if rep.ok else 1


def _cmd_export(cfg: RunConfig, args: argparse.Namespace) -> int:
    mesh = _build_mesh(cfg)
    save_mesh(mesh, args.mesh_out)
    print(f"wrote {args.mesh_out}")
    if args.constraints_out:
        from .tracespace import build_single_trace_map

        export_constraint_map(
            args.constraints_out, build_single_trace_map(mesh)
        )
        print(f"wrote {args.constraints_out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="INI-style run configuration file")
    sub.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config entry (repeatable)",
    )
    sub.add_argument("--builtin", help="builtin geometry, e.g. icosphere:3")
    sub.add_argument("--mesh", help="mesh file (.off or .msh)")
    sub.add_argument("--out", help="artifact directory")
    sub.add_argument(
        "-v", "--verbose", action="store_true", help="log progress to stderr"
    )


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavebem",
        description=(
            "Boundary-element solver for acoustic transmission problems "
            "with mixed boundary conditions"
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    freq = commands.add_parser(
        "solve-frequency", help="one Laplace-domain solve"
    )
    freq.add_argument("--s", help="complex frequency, e.g. 2+1i")
    freq.add_argument(
        "--manufactured",
        help="manufactured data family (point-source); reports trace error",
    )
    freq.add_argument("--points", help="probe points 'x,y,z; x,y,z'")
    _add_common(freq)

    time_cmd = commands.add_parser(
        "solve-time", help="convolution-quadrature time march"
    )
    time_cmd.add_argument("--horizon", help="final time")
    time_cmd.add_argument("--steps", help="number of time steps")
    time_cmd.add_argument("--scheme", help="BDF1 or BDF2")
    time_cmd.add_argument("--points", help="probe points 'x,y,z; x,y,z'")
    _add_common(time_cmd)

    verify = commands.add_parser(
        "verify", help="run verification probes"
    )
    verify.add_argument(
        "--suite",
        help=f"comma-separated probe names or 'all' ({', '.join(SUITE_PROBES)})",
    )
    verify.add_argument("--level", help="mesh level override for probes")
    verify.add_argument("--seed", help="random seed override for probes")
    _add_common(verify)

    info = commands.add_parser("mesh-info", help="validate and describe a mesh")
    _add_common(info)

    export = commands.add_parser("export", help="write a mesh to disk")
    export.add_argument(
        "--mesh-out", required=True, help="output path (.off or .msh)"
    )
    export.add_argument(
        "--constraints-out", help="optional single-trace constraint map path"
    )
    _add_common(export)
    return parser


_DISPATCH = {
    "solve-frequency": _cmd_solve_frequency,
    "solve-time": _cmd_solve_time,
    "verify": _cmd_verify,
    "mesh-info": _cmd_mesh_info,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, args.assignments)
        _apply_flags(cfg, args)
        if args.command == "export":
            return _cmd_export(cfg, args)
        return _DISPATCH[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # bad parameter combinations surface as configuration problems
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
