"""Scenario documents (JSON) and result files (JSON/CSV)."""

from __future__ import annotations

import json
import os
from importlib import resources
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .grid import Grid, InvalidArgument, Obstacle, build_grid, point_blocked, rasterize, sample_bilinear_many
from .nash import EquilibriumReport, ParetoPoint, Tolerances
from .trajectory import Evader, GameContext, Trajectory
from .visibility import ObserverSet


class ScenarioError(InvalidArgument):
    """Schema or validation problem in a scenario document; the message names the field."""


@dataclass(frozen=True)
class EvaderSpec:
    source: tuple[float, float]
    target: tuple[float, float]
    weight: float = 1.0
    # a constant, a path to a CSV field file, or an inline nested tuple
    speed: Any = 1.0


@dataclass(frozen=True)
class Scenario:
    bounds: tuple[float, float, float, float]
    n_x: int
    n_y: int
    obstacles: tuple[Obstacle, ...]
    observers: ObserverSet
    evaders: tuple[EvaderSpec, ...]
    tolerances: Tolerances = Tolerances()
    pareto_samples: int | None = None
    step_size: float | None = None
    shadow_method: str = "exact"
    name: str = ""
    base_dir: str = field(default="", compare=False)

    @property
    def grid(self) -> Grid:
        return build_grid(self.bounds, self.n_x, self.n_y)

    def with_grid_n(self, n: int) -> "Scenario":
        return replace(self, n_x=int(n), n_y=int(n))

    def with_iterations(self, iters: int) -> "Scenario":
        return replace(self, tolerances=replace(self.tolerances, iters=int(iters)))

    def to_dict(self) -> dict:
        tol = asdict(self.tolerances)
        tol.pop("stagnation")
        out = {
            "name": self.name,
            "grid": {"bounds": list(self.bounds), "n_x": self.n_x, "n_y": self.n_y},
            "obstacles": [ob.to_dict() for ob in self.obstacles],
            "observers": {
                "positions": [list(p) for p in self.observers.positions],
                "sigma": self.observers.sigma,
                "rho": self.observers.rho,
                "khat_offset": self.observers.khat_offset,
            },
            "evaders": [
                {
                    "source": list(e.source),
                    "target": list(e.target),
                    "weight": e.weight,
                    "speed": _speed_to_json(e.speed),
                }
                for e in self.evaders
            ],
            "iterations": tol.pop("iters"),
            "tolerances": tol,
            "shadow_method": self.shadow_method,
        }
        if self.pareto_samples is not None:
            out["pareto_samples"] = self.pareto_samples
        if self.step_size is not None:
            out["step_size"] = self.step_size
        return out


def _speed_to_json(speed):
    if isinstance(speed, str):
        return {"file": speed}
    if isinstance(speed, tuple):
        return [list(row) for row in speed]
    return speed


def _fail(path: str, msg: str):
    raise ScenarioError(f"{path}: {msg}")


def _get(d: dict, key: str, path: str, default=...):
    if key in d:
        return d[key]
    if default is ...:
        _fail(f"{path}.{key}" if path else key, "missing required field")
    return default


def _number(v, path: str, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v):
        _fail(path, "must be finite")
    if positive and not v > 0:
        _fail(path, "must be positive")
    if nonneg and v < 0:
        _fail(path, "must be non-negative")
    return v


def _count(v, path: str, minimum: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        _fail(path, f"expected an integer >= {minimum}, got {v!r}")
    return int(v)


def _point(v, path: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        _fail(path, "expected a point [x, y]")
    return (_number(v[0], f"{path}[0]"), _number(v[1], f"{path}[1]"))


def _check_keys(d, allowed: Sequence[str], path: str):
    if not isinstance(d, dict):
        _fail(path or "document", "expected an object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        _fail(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


def _parse_obstacle(d, path: str) -> Obstacle:
    _check_keys(d, ("type", "corners", "vertices"), path)
    kind = _get(d, "type", path)
    try:
        if kind == "rectangle":
            c = _get(d, "corners", path)
            if not isinstance(c, list) or len(c) != 4:
                _fail(f"{path}.corners", "expected [x0, y0, x1, y1]")
            return Obstacle.rectangle(*[_number(x, f"{path}.corners[{i}]") for i, x in enumerate(c)])
        if kind == "polygon":
            vs = _get(d, "vertices", path)
            if not isinstance(vs, list):
                _fail(f"{path}.vertices", "expected a list of points")
            return Obstacle.polygon([_point(v, f"{path}.vertices[{i}]") for i, v in enumerate(vs)])
    except ScenarioError:
        raise
    except InvalidArgument as exc:
        _fail(path, str(exc))
    _fail(f"{path}.type", f"unknown obstacle type {kind!r}")


def _parse_speed(v, path: str, base_dir: str):
    if isinstance(v, dict):
        _check_keys(v, ("file",), path)
        f = _get(v, "file", path)
        if not isinstance(f, str):
            _fail(f"{path}.file", "expected a path")
        full = f if os.path.isabs(f) or not base_dir else os.path.join(base_dir, f)
        if not os.path.exists(full):
            _fail(f"{path}.file", f"no such file {f!r}")
        return f
    if isinstance(v, list):
        try:
            arr = np.array(v, dtype=float)
        except (TypeError, ValueError):
            _fail(path, "inline speed field must be a rectangular array of numbers")
        if arr.ndim != 2 or not (arr > 0).all() or not np.isfinite(arr).all():
            _fail(path, "inline speed field must be a 2-D array of positive numbers")
        return tuple(tuple(float(x) for x in row) for row in arr)
    return _number(v, path, positive=True)


_TOL_KEYS = {f.name for f in fields(Tolerances)} - {"iters", "stagnation"}


def parse_scenario(text: str, base_dir: str | os.PathLike = "") -> Scenario:
    """Validated :class:`Scenario` from a JSON document, with defaults filled in."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"document: invalid JSON ({exc})") from None
    _check_keys(
        doc,
        ("name", "grid", "obstacles", "observers", "evaders", "tolerances", "iterations",
         "pareto_samples", "step_size", "shadow_method"),
        "",
    )
    base_dir = str(base_dir)

    g = doc.get("grid", {})
    _check_keys(g, ("bounds", "n", "n_x", "n_y"), "grid")
    b = g.get("bounds", [0.0, 1.0, 0.0, 1.0])
    if not isinstance(b, list) or len(b) != 4:
        _fail("grid.bounds", "expected [x_min, x_max, y_min, y_max]")
    bounds = tuple(_number(x, f"grid.bounds[{i}]") for i, x in enumerate(b))
    if not (bounds[0] < bounds[1] and bounds[2] < bounds[3]):
        _fail("grid.bounds", "empty domain")
    n = _count(g.get("n", 501), "grid.n", 3)
    n_x = _count(g.get("n_x", n), "grid.n_x", 3)
    n_y = _count(g.get("n_y", n), "grid.n_y", 3)

    obs_raw = doc.get("obstacles", [])
    if not isinstance(obs_raw, list):
        _fail("obstacles", "expected a list")
    obstacles = tuple(_parse_obstacle(o, f"obstacles[{i}]") for i, o in enumerate(obs_raw))
    for i, ob in enumerate(obstacles):
        v = np.asarray(ob.vertices)
        if (v[:, 0] < bounds[0]).any() or (v[:, 0] > bounds[1]).any() or (v[:, 1] < bounds[2]).any() or (v[:, 1] > bounds[3]).any():
            _fail(f"obstacles[{i}]", "extends outside the domain")

    def in_domain(p, path):
        if not (bounds[0] <= p[0] <= bounds[1] and bounds[2] <= p[1] <= bounds[3]):
            _fail(path, f"{p} outside the domain")
        if point_blocked(obstacles, p):
            _fail(path, f"{p} inside an obstacle")

    o = _get(doc, "observers", "")
    _check_keys(o, ("positions", "sigma", "rho", "khat_offset"), "observers")
    pos = _get(o, "positions", "observers")
    if not isinstance(pos, list) or not pos:
        _fail("observers.positions", "expected a non-empty list of points")
    positions = tuple(_point(p, f"observers.positions[{i}]") for i, p in enumerate(pos))
    for i, p in enumerate(positions):
        in_domain(p, f"observers.positions[{i}]")
    observers = ObserverSet(
        positions,
        sigma=_number(o.get("sigma", 0.1), "observers.sigma", positive=True),
        rho=_number(o.get("rho", 1.0), "observers.rho", nonneg=True),
        khat_offset=_number(o.get("khat_offset", 0.1), "observers.khat_offset", positive=True),
    )

    ev_raw = _get(doc, "evaders", "")
    if not isinstance(ev_raw, list) or not ev_raw:
        _fail("evaders", "expected a non-empty list")
    evaders = []
    for i, e in enumerate(ev_raw):
        path = f"evaders[{i}]"
        _check_keys(e, ("source", "target", "weight", "speed"), path)
        src = _point(_get(e, "source", path), f"{path}.source")
        tgt = _point(_get(e, "target", path), f"{path}.target")
        in_domain(src, f"{path}.source")
        in_domain(tgt, f"{path}.target")
        evaders.append(
            EvaderSpec(
                src,
                tgt,
                _number(e.get("weight", 1.0), f"{path}.weight", positive=True),
                _parse_speed(e.get("speed", 1.0), f"{path}.speed", base_dir),
            )
        )

    t = doc.get("tolerances", {})
    _check_keys(t, sorted(_TOL_KEYS), "tolerances")
    kw = {}
    for k, v in t.items():
        kw[k] = v if k == "value" else _number(v, f"tolerances.{k}")
    if "extra_generations" in kw:
        kw["extra_generations"] = _count(t["extra_generations"], "tolerances.extra_generations", 0)
    iters = _count(doc.get("iterations", 100), "iterations", 1)
    try:
        tolerances = Tolerances(iters=iters, **kw)
    except InvalidArgument as exc:
        raise ScenarioError(f"tolerances: {exc}") from None

    ps = doc.get("pareto_samples")
    step = doc.get("step_size")
    method = doc.get("shadow_method", "exact")
    if method not in ("exact", "eikonal"):
        _fail("shadow_method", "expected 'exact' or 'eikonal'")
    name = doc.get("name", "")
    if not isinstance(name, str):
        _fail("name", "expected a string")
    return Scenario(
        bounds=bounds,
        n_x=n_x,
        n_y=n_y,
        obstacles=obstacles,
        observers=observers,
        evaders=tuple(evaders),
        tolerances=tolerances,
        pareto_samples=None if ps is None else _count(ps, "pareto_samples", 2),
        step_size=None if step is None else _number(step, "step_size", positive=True),
        shadow_method=method,
        name=name,
        base_dir=base_dir,
    )


def load_scenario(path: str | os.PathLike) -> Scenario:
    p = Path(path)
    return parse_scenario(p.read_text(), base_dir=p.parent)


def bundled_scenarios() -> list[str]:
    """Names of the scenario documents shipped with the package."""
    return sorted(p.name[:-5] for p in resources.files("segnash").joinpath("data").iterdir()
                  if p.name.endswith(".json"))


def load_bundled(name: str) -> Scenario:
    """Parse one of :func:`bundled_scenarios` by name."""
    if name not in bundled_scenarios():
        raise ScenarioError(f"no bundled scenario {name!r}; have {bundled_scenarios()}")
    return parse_scenario(resources.files("segnash").joinpath("data", f"{name}.json").read_text())


def read_field_csv(path: str | os.PathLike) -> np.ndarray:
    """CSV of ``n_y`` rows by ``n_x`` columns; the token ``inf`` reads as ``+inf``."""
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _speed_array(spec: EvaderSpec, scn: Scenario, grid: Grid):
    speed = spec.speed
    if isinstance(speed, float):
        return speed
    if isinstance(speed, str):
        full = speed if os.path.isabs(speed) or not scn.base_dir else os.path.join(scn.base_dir, speed)
        arr = read_field_csv(full)
    else:
        arr = np.array(speed, dtype=float)
    if arr.shape == grid.shape:
        return arr
    # stored on its own uniform grid over the same bounds
    src = build_grid(scn.bounds, arr.shape[1], arr.shape[0])
    X, Y = grid.mesh()
    return sample_bilinear_many(src, arr, np.column_stack([X.ravel(), Y.ravel()])).reshape(grid.shape)


def build_context(scn: Scenario, n: int | None = None) -> GameContext:
    """Grid, rasterised obstacles, observability fields and evaders for a scenario."""
    if n is not None:
        scn = scn.with_grid_n(n)
    grid = scn.grid
    evaders = [Evader(e.source, e.target, e.weight, _speed_array(e, scn, grid)) for e in scn.evaders]
    return GameContext(
        grid,
        rasterize(grid, scn.obstacles),
        scn.obstacles,
        scn.observers,
        evaders,
        step_size=scn.step_size,
        shadow_method=scn.shadow_method,
    )


def fmt(x: float) -> str:
    x = float(x)
    if np.isposinf(x):
        return "inf"
    if np.isneginf(x):
        return "-inf"
    return f"{x:.12g}"


def _round(obj):
    """Reals rounded to 12 significant digits, recursively, for JSON output."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if not np.isfinite(x) else float(f"{x:.12g}")
    return obj


def write_field_csv(path: str | os.PathLike, values: np.ndarray) -> None:
    lines = [",".join(fmt(v) for v in row) for row in np.asarray(values, dtype=float)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectory_csv(path: str | os.PathLike, traj: Trajectory) -> None:
    lines = ["x,y"] + [f"{fmt(x)},{fmt(y)}" for x, y in traj.points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path: str | os.PathLike) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_pareto_csv(path: str | os.PathLike, front: Sequence[ParetoPoint]) -> None:
    r = len(front[0].costs) if front else 2
    lines = [",".join(["lambda_1"] + [f"J_{i + 1}" for i in range(r)])]
    for p in front:
        lines.append(",".join([fmt(p.lam[0])] + [fmt(c) for c in p.costs]))
    Path(path).write_text("\n".join(lines) + "\n")


def _dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_round(obj), indent=2, sort_keys=False, allow_nan=True) + "\n")


def report_dict(report: EquilibriumReport, scenario: Scenario | None = None) -> dict:
    out = {
        "lambda_star": report.lambda_star,
        "support": [int(i) for i in report.support],
        "omega": report.omega,
        "game_value": report.game_value,
        "eikonal_value": report.eikonal_value,
        "residual": report.residual,
        "residual_norm": report.residual_norm,
        "tol_R": report.tol_R,
        "converged": report.converged,
        "deltas": report.deltas,
        "trajectories": [
            {"index": k + 1, "costs": report.columns[k], "omega": report.omega[k]}
            for k in range(report.k)
        ],
        "evaders": [
            {"omega": s.omega, "costs": s.costs} for s in report.strategies
        ],
        "metrics": {
            "observer_regret": report.metrics.get("observer_regret"),
            "evader_regret": report.metrics.get("evader_regret"),
            "relative_error": report.metrics.get("relative_error"),
        },
        "counters": {
            k: v for k, v in report.counters.items() if not k.endswith("seconds")
        },
    }
    if "fine_game_value" in report.metrics:
        out["metrics"]["fine_game_value"] = report.metrics["fine_game_value"]
        out["metrics"]["fine_lambda_star"] = report.metrics["fine_lambda_star"]
    if scenario is not None:
        out["scenario"] = scenario.to_dict()
    return out


def write_report(
    report: EquilibriumReport,
    ctx: GameContext,
    out_dir: str | os.PathLike,
    scenario: Scenario | None = None,
    front: Sequence[ParetoPoint] | None = None,
) -> list[Path]:
    """Write the equilibrium, value field, trajectories and optional front to ``out_dir``.

    Everything but ``timings.json`` is a deterministic function of the inputs.
    ``value_lambda_star.csv`` holds the value field the first trajectory was
    traced on, so re-tracing it reproduces ``traj_1.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def path(name):
        p = out / name
        written.append(p)
        return p

    _dump_json(path("equilibrium.json"), report_dict(report, scenario))
    _dump_json(path("timings.json"), {k: v for k, v in report.counters.items() if k.endswith("seconds")})
    lam1 = report.generation_lambdas[0]
    fields_ = ctx.value_fields(lam1)
    write_field_csv(path("value_lambda_star.csv"), fields_[0])
    for l in range(1, ctx.q):
        write_field_csv(path(f"value_lambda_star_e{l + 1}.csv"), fields_[l])
    for k, gen in enumerate(report.generations):
        write_trajectory_csv(path(f"traj_{k + 1}.csv"), gen[0])
        for l in range(1, len(gen)):
            write_trajectory_csv(path(f"traj_e{l + 1}_{k + 1}.csv"), gen[l])
    if front is not None:
        write_pareto_csv(path("pareto.csv"), front)
    return written
