"""Scenario files: YAML documents describing a closed-loop experiment.

Schema (``schema_version: 1``)::

    schema_version: 1
    name: fig3_parabola
    plant: {model: trailer, length: 0.5}     # or {model: integrator, dim: 2}
    discretization: {method: rk4, dt: 0.1}   # rk4 | euler
    horizon: 50
    weights: {Q: [..], R: [..], QN: [..]}    # diagonals
    reference: {x: [..], u: [..]}
    inputs: {u_min: [..], u_max: [..]}
    obstacles:                               # may be empty
      - {kind: ball, center: [..], radius: r, eta: w, margin: m}
      - {kind: rectangle, lower: [..], upper: [..], eta: w, margin: m}
      - {kind: ellipsoid, center: [..], matrix: [[..]], eta: w, margin: m}
      - {kind: polytope, A: [[..]], b: [..], eta: w, margin: m}
      - {kind: halfspace, a: [..], b: v, eta: w, margin: m}
      - {kind: parabola, eta: w, margin: m}
      - {kind: sine_band, eta: w, margin: m}
    initial_states: [[..], ..]
    simulation: {steps: 200, position_tol: 0.01, heading_tol: 0.01,
                 perturbation: 0.0, seed: 0}
    solver: {tol: 1e-6, max_iter: 500, memory: 10}
    must_avoid: true

Optional per-obstacle ``window: [first, last]`` restricts the stages at
which the obstacle is enforced. ``margin`` is the safety enlargement used
by the controller; clearance is judged against the obstacle without it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .. import obstacles as obst
from ..panoc import SolverConfig
from ..problem import (ControlProblem, InputBox, QuadraticStageCost,
                       make_integrator_model, make_trailer_model)
from ..shooting import discretize_euler, discretize_rk4

__all__ = ["Scenario", "ScenarioError", "load_scenario", "parse_scenario",
           "shipped_scenarios", "scenario_path"]

SCHEMA_VERSION = 1

_OBSTACLE_FIELDS = {
    "ball": ("center", "radius"),
    "rectangle": ("lower", "upper"),
    "ellipsoid": ("center", "matrix"),
    "polytope": ("A", "b"),
    "halfspace": ("a", "b"),
    "parabola": (),
    "sine_band": (),
}


class ScenarioError(ValueError):
    """Schema violations, each message prefixed with its line number."""

    def __init__(self, errors, source=None):
        self.errors = list(errors)
        where = f"{source}: " if source else ""
        super().__init__(where + "; ".join(self.errors))


@dataclass(frozen=True)
class Scenario:
    name: str
    plant: dict
    method: str
    dt: float
    N: int
    Q: np.ndarray
    R: np.ndarray
    QN: np.ndarray
    x_ref: np.ndarray
    u_ref: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    obstacles: tuple
    initial_states: np.ndarray
    sim_steps: int = 200
    position_tol: float = 1e-2
    heading_tol: float = 1e-2
    perturbation: float = 0.0
    seed: int = 0
    solver: dict = field(default_factory=dict)
    must_avoid: bool = True
    description: str = ""

    @property
    def n_x(self):
        return self.x_ref.size

    @property
    def n_u(self):
        return self.u_ref.size

    def solver_config(self, **overrides):
        opts = dict(self.solver)
        opts.update({k: v for k, v in overrides.items() if v is not None})
        return SolverConfig(**opts)

    def continuous_model(self):
        kind = self.plant["model"]
        if kind == "trailer":
            return make_trailer_model(self.plant.get("length", 0.5))
        return make_integrator_model(int(self.plant.get("dim", self.n_x)))

    def model(self):
        discretize = discretize_rk4 if self.method == "rk4" else discretize_euler
        return discretize(self.continuous_model(), self.dt)

    def build_obstacles(self, enlarged=True):
        out = []
        for spec in self.obstacles:
            margin = spec.get("margin", 0.0) if enlarged else 0.0
            obs = _make_obstacle(spec, margin)
            window = spec.get("window")
            out.append((obs, tuple(window)) if window else (obs, (0, self.N)))
        return out

    def build_problem(self, x0=None):
        """Controller problem (with enlarged obstacles) from state ``x0``."""
        x0 = self.initial_states[0] if x0 is None else x0
        cost = QuadraticStageCost.diagonal(self.Q, self.R, self.QN, self.x_ref, self.u_ref)
        return ControlProblem(self.N, self.model(), cost, InputBox(self.u_min, self.u_max),
                              x0, self.build_obstacles(enlarged=True))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _make_obstacle(spec, margin):
    kind = spec["kind"]
    eta = spec.get("eta", 1.0)
    name = spec.get("name", kind)
    if kind == "ball":
        return obst.ball(spec["center"], spec["radius"], eta, margin, name)
    if kind == "rectangle":
        return obst.rectangle(spec["lower"], spec["upper"], eta, margin, name)
    if kind == "ellipsoid":
        return obst.ellipsoid(spec["center"], spec["matrix"], eta, margin, name)
    if kind == "polytope":
        return obst.polytope(spec["A"], spec["b"], eta, margin, name)
    if kind == "halfspace":
        return obst.halfspace(spec["a"], spec["b"], eta, margin, name)
    if kind == "parabola":
        return obst.parabola(eta, margin, name)
    return obst.sine_band(eta, margin, name)


# -- parsing -----------------------------------------------------------------

class _Doc:
    """YAML node tree converted to Python values, remembering line numbers."""

    def __init__(self, text):
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        self.lines = {}
        self.value = self._build(node, ()) if node is not None else {}

    def _build(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = k.value
                self.lines[path + (key,)] = k.start_mark.line + 1
                out[key] = self._build(v, path + (key,))
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._build(v, path + (i,)) for i, v in enumerate(node.value)]
        return _scalar(node)

    def line(self, path):
        while path not in self.lines and path:
            path = path[:-1]
        return self.lines.get(path, 1)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node)
    finally:
        loader.dispose()


class _Checker:
    def __init__(self, doc):
        self.doc = doc
        self.errors = []

    def fail(self, path, msg):
        self.errors.append(f"line {self.doc.line(path)}: {'.'.join(map(str, path)) or '<root>'}: {msg}")

    def get(self, path, required=True, default=None):
        node = self.doc.value
        for key in path:
            if isinstance(node, dict) and key in node:
                node = node[key]
            elif isinstance(node, list) and isinstance(key, int) and key < len(node):
                node = node[key]
            else:
                if required:
                    self.fail(path, "missing field")
                return default
        return node

    def number(self, path, required=True, default=None, positive=False):
        v = self.get(path, required, default)
        if v is None:
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, f"expected a number, got {v!r}")
            return default
        if positive and not v > 0:
            self.fail(path, f"must be positive, got {v}")
        return float(v)

    def vector(self, path, length=None, required=True):
        v = self.get(path, required)
        if v is None:
            return None
        try:
            arr = np.array(v, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, f"expected a list of numbers, got {v!r}")
            return None
        if arr.ndim != 1:
            self.fail(path, "expected a flat list")
            return None
        if length is not None and arr.size != length:
            self.fail(path, f"dimension mismatch: length {arr.size}, expected {length}")
            return None
        return arr

    def matrix(self, path, shape=None):
        v = self.get(path)
        if v is None:
            return None
        try:
            arr = np.array(v, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, f"expected a matrix, got {v!r}")
            return None
        if arr.ndim != 2 or (shape is not None and arr.shape != shape):
            self.fail(path, f"dimension mismatch: shape {arr.shape}, expected {shape}")
            return None
        return arr


def parse_scenario(text, source=None) -> Scenario:
    """Parse and validate scenario YAML; raise :class:`ScenarioError`."""
    try:
        doc = _Doc(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else 1
        raise ScenarioError([f"line {line}: malformed YAML: {getattr(exc, 'problem', exc)}"], source)
    if not isinstance(doc.value, dict):
        raise ScenarioError(["line 1: top level must be a mapping"], source)
    c = _Checker(doc)

    version = c.get(("schema_version",))
    if version is not None and version != SCHEMA_VERSION:
        c.fail(("schema_version",), f"unsupported schema version {version!r}")
    name = c.get(("name",), required=False, default=Path(str(source or "scenario")).stem)

    plant = c.get(("plant",)) or {}
    model = plant.get("model") if isinstance(plant, dict) else None
    if model == "trailer":
        n_x, n_u = 3, 2
        c.number(("plant", "length"), required=False, default=0.5, positive=True)
    elif model == "integrator":
        n_x = n_u = int(c.number(("plant", "dim"), positive=True) or 1)
    else:
        if plant:
            c.fail(("plant", "model"), f"unknown plant model {model!r}")
        n_x = n_u = None

    method = c.get(("discretization", "method"))
    if method is not None and method not in ("rk4", "euler"):
        c.fail(("discretization", "method"), f"unknown method {method!r}")
    dt = c.number(("discretization", "dt"), positive=True)
    N = c.number(("horizon",), positive=True)
    if N is not None and N != int(N):
        c.fail(("horizon",), "must be an integer")

    Q = c.vector(("weights", "Q"), n_x)
    R = c.vector(("weights", "R"), n_u)
    QN = c.vector(("weights", "QN"), n_x)
    for key, w in (("Q", Q), ("R", R), ("QN", QN)):
        if w is not None and np.any(w < 0):
            c.fail(("weights", key), "weights must be nonnegative")
    x_ref = c.vector(("reference", "x"), n_x)
    u_ref = c.vector(("reference", "u"), n_u, required=False)
    if u_ref is None and n_u is not None:
        u_ref = np.zeros(n_u)
    u_min = c.vector(("inputs", "u_min"), n_u)
    u_max = c.vector(("inputs", "u_max"), n_u)
    if u_min is not None and u_max is not None and np.any(u_min > u_max):
        c.fail(("inputs",), "box bounds crossed: u_min > u_max")

    specs = []
    raw_obstacles = c.get(("obstacles",), required=False, default=[]) or []
    if not isinstance(raw_obstacles, list):
        c.fail(("obstacles",), "expected a list")
        raw_obstacles = []
    for j, spec in enumerate(raw_obstacles):
        p = ("obstacles", j)
        if not isinstance(spec, dict):
            c.fail(p, "expected a mapping")
            continue
        kind = spec.get("kind")
        if kind not in _OBSTACLE_FIELDS:
            c.fail(p + ("kind",), f"unknown obstacle kind {kind!r}")
            continue
        clean = {"kind": kind, "eta": c.number(p + ("eta",), positive=True),
                 "margin": c.number(p + ("margin",), required=False, default=0.0)}
        if clean["margin"] is not None and clean["margin"] < 0:
            c.fail(p + ("margin",), "margin must be nonnegative")
        if "name" in spec:
            clean["name"] = str(spec["name"])
        for key in _OBSTACLE_FIELDS[kind]:
            if key in ("A", "matrix"):
                clean[key] = c.matrix(p + (key,))
            elif key in ("radius",) or (kind == "halfspace" and key == "b"):
                clean[key] = c.number(p + (key,), positive=(key == "radius"))
            else:
                clean[key] = c.vector(p + (key,), 2 if key != "b" else None)
        if "window" in spec:
            w = spec["window"]
            if (not isinstance(w, list) or len(w) != 2 or N is None
                    or not 0 <= w[0] <= w[1] <= N):
                c.fail(p + ("window",), f"window must be [first, last] within [0, horizon], got {w!r}")
            else:
                clean["window"] = (int(w[0]), int(w[1]))
        specs.append(clean)

    starts = c.get(("initial_states",))
    x_init = None
    if starts is not None:
        if not isinstance(starts, list) or not starts:
            c.fail(("initial_states",), "expected a nonempty list of states")
        else:
            rows = [c.vector(("initial_states", i), n_x) for i in range(len(starts))]
            if all(r is not None for r in rows):
                x_init = np.array(rows)

    sim = ("simulation",)
    steps = c.number(sim + ("steps",), required=False, default=200, positive=True)
    if steps is not None and (steps != int(steps) or steps < 1):
        c.fail(sim + ("steps",), "must be an integer >= 1")
    solver = c.get(("solver",), required=False, default={}) or {}
    allowed = {f.name for f in dataclasses.fields(SolverConfig)}
    for key in solver:
        if key not in allowed:
            c.fail(("solver", key), f"unknown solver option {key!r}")

    if c.errors:
        raise ScenarioError(c.errors, source)
    return Scenario(
        name=str(name), plant=dict(plant), method=method, dt=dt, N=int(N),
        Q=Q, R=R, QN=QN, x_ref=x_ref, u_ref=u_ref, u_min=u_min, u_max=u_max,
        obstacles=tuple(specs), initial_states=x_init, sim_steps=int(steps),
        position_tol=c.number(sim + ("position_tol",), required=False, default=1e-2),
        heading_tol=c.number(sim + ("heading_tol",), required=False, default=1e-2),
        perturbation=c.number(sim + ("perturbation",), required=False, default=0.0),
        seed=int(c.number(sim + ("seed",), required=False, default=0)),
        solver={k: v for k, v in solver.items() if k in allowed},
        must_avoid=bool(c.get(("must_avoid",), required=False, default=True)),
        description=str(c.get(("description",), required=False, default="")),
    )


def shipped_scenarios():
    """Names of the scenario files bundled with the package."""
    files = resources.files("panocnav").joinpath("scenarios").iterdir()
    return sorted(Path(f.name).stem for f in files if f.name.endswith(".yaml"))


def scenario_path(name_or_path):
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = resources.files("panocnav").joinpath("scenarios", f"{p.stem}.yaml")
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no scenario file or shipped scenario named {name_or_path!r}")


def load_scenario(path) -> Scenario:
    """Load a scenario from a path or the name of a shipped scenario."""
    p = scenario_path(path)
    return parse_scenario(p.read_text(), source=str(p))
