"""Command line entry point.

    mcflab barrier-check [--n 2 --R 1 --lambda 3.14 --f simple]
    mcflab solve-radial --profile complete-ball --ladder 10,20,40 --t_end 0.2
    mcflab experiment {annulus,oscillation,asymptotics,shadow-flow} [--key value ...]
    mcflab geometry-verify [--patches 50]

Settings come from an optional JSON file (``--config``) overridden by flat
``--key value`` flags.  Exit codes: 0 all checks passed, 1 a check failed,
2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments as E
from . import solver as S
from .barriers import BarrierSpec, FChoice
from .errors import McfLabError, NumericFailure, UsageError
from .verify import barrier_suite, geometry_verification

COMMANDS = ("barrier-check", "solve-radial", "experiment", "geometry-verify")
EXPERIMENTS = ("annulus", "oscillation", "asymptotics", "shadow-flow")


def _floats(v):
    if isinstance(v, str):
        v = [x for x in v.replace("[", "").replace("]", "").split(",") if x.strip()]
    if not isinstance(v, (list, tuple)):
        v = [v]
    return [float(x) for x in v]


def _bool(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes", "on"):
        return True
    if str(v).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"not an integer: {v!r}")
    return int(f)


_F = (float, None)
KEYS = {
    "barrier-check": {"n": (_int, None), "R": _F, "lambda": _F, "f": (str, None), "margin": (float, 1e-3),
                      "samples": (_int, 10_000), "jet_samples": (_int, 1000)},
    "solve-radial": {"profile": (str, "complete-ball"), "n": (_int, 2), "r_max": _F, "nodes": (_int, 257),
                     "rho": (float, 1.0), "alpha": (float, 2.0), "C": (float, 1.0), "lambda": (float, 1.0),
                     "value": (float, 0.0), "t_end": (float, 0.2), "ladder": (_floats, None),
                     "snapshots": (_floats, None), "stepper": (str, "explicit"), "cfl": (float, 0.25),
                     "mollify_radius": (float, 0.0), "threshold": _F},
    "annulus": {"n": (_int, 2), "R": (float, 0.5), "lambda": (float, 2 * math.pi), "f": (str, "simple"),
                "margin": (float, 1e-3), "nodes": (_int, 513), "r_max": (float, 1.0), "cap": (float, 100.0),
                "t_count": (_int, 8)},
    "oscillation": {"kMax": (_int, 40), "f": (str, "simple")},
    "asymptotics": {"n": (_int, 2), "rho": (float, 1.0), "alpha": (float, 2.0), "C": (float, 1.0),
                    "nodes": (_int, 513), "pde": (_bool, True), "ladder": (_floats, [10.0, 20.0, 40.0, 80.0])},
    "shadow-flow": {"n": (_int, 2), "rho": (float, 1.0), "alpha": (float, 2.0), "nodes": (_int, 513),
                    "ladder": (_floats, [10.0, 20.0, 40.0, 80.0]), "t_samples": (_floats, [0.1, 0.2, 0.3, 0.4])},
    "geometry-verify": {"patches": (_int, 50)},
}
GLOBAL_KEYS = {"seed": (_int, 0), "output": (str, None)}
FILE_ONLY = {"command", "experimentName"}


@dataclass
class RunConfig:
    command: str
    experiment_name: str | None = None
    params: dict = field(default_factory=dict)
    output_dir: Path = Path("mcflab-output")
    seed: int = 0

    @property
    def section(self) -> str:
        return self.experiment_name if self.command == "experiment" else self.command


def _split_flags(tokens: list[str]) -> dict:
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}; settings are given as --key value")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise UsageError(f"missing value for --{key}")
            val = tokens[i + 1]
            i += 2
        out[key] = val
    return out


def parse_config(args: list[str], config_file: str | Path | None = None) -> RunConfig:
    if any(a in ("-h", "--help") for a in args):
        raise UsageError(__doc__.strip())
    positional = []
    while len(positional) < len(args) and not args[len(positional)].startswith("--"):
        positional.append(args[len(positional)])
    if len(positional) > 2:
        raise UsageError(f"too many positional arguments: {positional}")
    flags = _split_flags(list(args[len(positional):]))
    cmd_arg = positional[0] if positional else None
    name_arg = positional[1] if len(positional) > 1 else None
    config_path = flags.pop("config", None) or config_file
    file_vals = {}
    if config_path is not None:
        try:
            file_vals = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {config_path}: {exc}") from exc
        if not isinstance(file_vals, dict):
            raise UsageError("config file must hold a JSON object")

    command = cmd_arg or file_vals.get("command")
    if command not in COMMANDS:
        raise UsageError(f"unknown or missing command {command!r}; valid commands: {', '.join(COMMANDS)}")
    name = name_arg or file_vals.get("experimentName")
    if command == "experiment":
        if name not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {name!r}; valid experiments: {', '.join(EXPERIMENTS)}")
    elif name_arg is not None:
        raise UsageError(f"unexpected argument {name_arg!r} for {command}")

    section = name if command == "experiment" else command
    schema = {**KEYS[section], **GLOBAL_KEYS}
    raw = {k: v for k, v in file_vals.items() if k not in FILE_ONLY}
    raw.update(flags)
    params = {}
    for key, val in raw.items():
        if key not in schema:
            raise UsageError(f"unknown key {key!r} for {section}; valid keys: {', '.join(sorted(schema))}")
        conv = schema[key][0]
        try:
            params[key] = conv(val)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key!r}: {exc}") from exc
    for key, (_, default) in schema.items():
        params.setdefault(key, default)

    if section in ("barrier-check", "annulus", "asymptotics") and params.get("n") is not None and params["n"] < 2:
        raise UsageError(f"{section} requires n >= 2 (got n={params['n']})")
    for key in ("f",):
        if params.get(key) is not None and params[key] not in {c.value for c in FChoice}:
            raise UsageError(f"f must be one of {[c.value for c in FChoice]}")

    seed = params.pop("seed")
    out = params.pop("output") or os.environ.get("MCFLAB_OUTPUT") or "mcflab-output"
    return RunConfig(command, name if command == "experiment" else None, params, Path(out), seed)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _barrier_check(cfg: RunConfig):
    p = cfg.params
    ns = [p["n"]] if p["n"] is not None else [2, 3]
    Rs = [p["R"]] if p["R"] is not None else [0.5, 1.0, 2.0]
    lams = [p["lambda"]] if p["lambda"] is not None else [1.0, 10.0, 100.0]
    fs = [p["f"]] if p["f"] is not None else [c.value for c in FChoice]
    specs = [BarrierSpec(n, R, lam, f, p["margin"]) for n in ns for R in Rs for lam in lams for f in fs]
    return [barrier_suite(specs, p["samples"], p["jet_samples"], cfg.seed)], []


def _profile(p):
    kind = p["profile"]
    if kind == "complete-ball":
        rho, alpha, C = p["rho"], p["alpha"], p["C"]
        return (lambda r: np.where(r < rho, C * (rho - np.asarray(r, float)) ** -alpha, np.inf)), None, rho
    if kind == "grim-reaper":
        lam = p["lambda"]
        exact = lambda r, t: -np.log(np.cos(lam * np.asarray(r, float))) / lam + lam * t
        r_max = p["r_max"] if p["r_max"] is not None else 0.75 * math.pi / (2 * lam)
        if r_max >= math.pi / (2 * lam):
            raise UsageError("grim-reaper profile needs r_max < pi/(2 lambda)")
        return (lambda r: exact(r, 0.0)), (lambda t: float(exact(r_max, t))), r_max
    if kind == "constant":
        return (lambda r: np.full_like(np.asarray(r, float), p["value"])), None, 1.0
    if kind == "paraboloid":
        return (lambda r: p["value"] + np.asarray(r, float) ** 2), None, 1.0
    raise UsageError(f"unknown profile {kind!r}; valid: complete-ball, grim-reaper, constant, paraboloid")


def _solve_radial(cfg: RunConfig):
    p = cfg.params
    u0, boundary, default_rmax = _profile(p)
    grid = S.RadialGrid(p["n"], p["r_max"] if p["r_max"] is not None else default_rmax, p["nodes"])
    times = sorted(set(p["snapshots"] or []) | {p["t_end"]})
    rep = E.ExperimentReport("solve_radial", parameters={k: v for k, v in sorted(p.items())})
    files = []
    if p["ladder"]:
        conf = S.SolverConfig(p["stepper"], p["cfl"], truncation_schedule=tuple(p["ladder"]),
                              mollify_radius=p["mollify_radius"])
        res = S.run_truncation_ladder(u0, grid, conf, p["t_end"], times)
        runs = res.all_snapshots
        for a in res.levels:
            rep.add_series(f"origin_a{a:g}", res.times, res.origin_values[a])
        rep.metrics["origin_cauchy_increments_first_sample"] = res.cauchy_increments(0)
    else:
        conf = S.SolverConfig(p["stepper"], p["cfl"], mollify_radius=p["mollify_radius"])
        state = S.initial_state(u0, grid, math.inf, conf.mollify_radius, boundary)
        runs = {math.inf: S.evolve(state, conf, times)}
        rep.add_series("origin", times, [s.u[0] for s in runs[math.inf]])
    finite = True
    for a, snaps in runs.items():
        run_id = f"a{a:g}" if math.isfinite(a) else "single"
        for s in snaps:
            files.append(S.write_snapshot(s, cfg.output_dir, run_id))
            finite &= bool(np.all(np.isfinite(s.u[s.active])))
    top = runs[max(runs)]
    threshold = p["threshold"]
    if threshold is None and p["ladder"]:
        threshold = p["ladder"][-1] / 2
    if threshold is not None:
        radii = []
        for s in top:
            try:
                radii.append(S.shadow_radius(s, threshold))
            except S.EmptyShadow:
                radii.append(math.nan)
        rep.add_series("shadow_radius", times, radii)
    rep.check("finite_on_active_nodes", finite, finite, "u finite wherever u < a")
    return [rep], files


def _experiment(cfg: RunConfig):
    p, name = cfg.params, cfg.experiment_name
    if name == "oscillation":
        return [E.oscillation_bounds(E.CombSpec(p["kMax"]), p["f"])], []
    if name == "annulus":
        spec = BarrierSpec(p["n"], p["R"], p["lambda"], p["f"], p["margin"])
        grid = S.RadialGrid(spec.n, p["r_max"], p["nodes"])
        u0 = E.annulus_initial_data(spec, p["r_max"])
        ts = list(np.linspace(0, spec.T, p["t_count"] + 1)[1:])
        return [E.annulus_estimate_check(spec, u0, ts, grid, p["cap"])], []
    if name == "asymptotics":
        spec = E.AsymptoticsSpec(p["n"], p["rho"], p["alpha"], p["C"])
        ts = [spec.T - 10.0**-k for k in range(1, 10)]
        return [E.asymptotics_experiment(spec, ts, p["pde"], p["nodes"], p["ladder"])], []
    if name == "shadow-flow":
        rep, _ = E.shadow_flow_experiment(p["n"], p["rho"], p["alpha"], p["ladder"], p["t_samples"], p["nodes"])
        return [rep], []
    raise UsageError(f"unknown experiment {name!r}")


def _geometry(cfg: RunConfig):
    return [geometry_verification(cfg.params["patches"], cfg.seed)], []


HANDLERS = {"barrier-check": _barrier_check, "solve-radial": _solve_radial,
            "experiment": _experiment, "geometry-verify": _geometry}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(cfg: RunConfig) -> int:
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        reports, files = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (McfLabError, ValueError) as exc:
        print(f"usage error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    ok = True
    for rep in reports:
        rep.parameters["seed"] = cfg.seed
        files.extend(rep.write(out))
        for line in rep.summary_lines():
            print(line)
        ok &= rep.ok
    manifest = {
        "command": cfg.command,
        "experimentName": cfg.experiment_name,
        "seed": cfg.seed,
        "files": [{"path": f.relative_to(out).as_posix(), "sha256": _sha256(f)} for f in sorted(set(files))],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"{'all checks passed' if ok else 'some checks FAILED'}; wrote {len(manifest['files'])} files to {out}")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if any(a in ("-h", "--help") for a in argv):
        print(__doc__.strip())
        return 0
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
