"""Run configuration: a strict flat TOML-style file, plus a tiny arithmetic
expression grammar for custom initial data and topography.

The parser covers exactly the surface this package writes and reads:
``[section]`` headers, ``key = value`` lines, comments, strings, numbers,
booleans and (nested) inline arrays.  Unknown sections or keys are rejected
by the schema with the offending name; syntax errors carry the line number.
(No TOML library ships with this Python, and the config surface is small
enough that a strict subset reader is the lighter dependency.)

Expressions for z/h0/u0 support +, -, *, /, ^, sin, cos, sqrt, max, the
variables x, y, t and the constant pi, evaluated vectorized at quadrature
points.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import cases as cases_mod
from .cases import CaseDefinition

__all__ = ["ConfigError", "RunConfig", "parse_config", "compile_expression", "build_case"]


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


# -- expression grammar --------------------------------------------------

_ALLOWED_BINOPS = {ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow}
_ALLOWED_UNARY = {ast.UAdd, ast.USub}
_FUNCS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "max": lambda *a: _variadic_max(a),
}
_CONSTS = {"pi": math.pi}


def _variadic_max(args):
    if len(args) < 2:
        raise ConfigError("max() needs at least two arguments")
    out = args[0]
    for a in args[1:]:
        out = np.maximum(out, a)
    return out


def _check_expr_node(node: ast.AST, variables: tuple):
    if isinstance(node, ast.Expression):
        _check_expr_node(node.body, variables)
    elif isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BINOPS:
        _check_expr_node(node.left, variables)
        _check_expr_node(node.right, variables)
    elif isinstance(node, ast.UnaryOp) and type(node.op) in _ALLOWED_UNARY:
        _check_expr_node(node.operand, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ConfigError(
                f"unknown function in expression (allowed: {', '.join(sorted(_FUNCS))})"
            )
        if node.keywords:
            raise ConfigError("keyword arguments are not part of the expression grammar")
        for a in node.args:
            _check_expr_node(a, variables)
    elif isinstance(node, ast.Name):
        if node.id not in variables and node.id not in _CONSTS:
            raise ConfigError(
                f"unknown name {node.id!r} in expression (variables: {', '.join(variables)}, pi)"
            )
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ConfigError(f"literal {node.value!r} is not a number")
    else:
        raise ConfigError(f"construct {type(node).__name__} is not part of the expression grammar")


def compile_expression(src: str, variables: tuple = ("x", "y", "t")) -> Callable:
    """Compile an expression string to a vectorized callable of (x, y, t)."""
    try:
        tree = ast.parse(src.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"invalid expression {src!r}: {exc.msg}") from None
    _check_expr_node(tree, variables)
    code = compile(tree, "<expression>", "eval")
    namespace = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def fn(x, y, t=0.0):
        scope = dict(namespace)
        scope.update({"x": x, "y": y, "t": t})
        val = eval(code, scope)  # noqa: S307 - AST whitelisted above
        return np.broadcast_arrays(val, np.asarray(x) + np.asarray(y))[0].astype(float)

    fn.source = src
    return fn


# -- TOML-subset reader ---------------------------------------------------


def _parse_value(text: str, line_no: int):
    text = text.strip()
    if not text:
        raise ConfigError(f"line {line_no}: missing value")
    if text[0] in "\"'":
        quote = text[0]
        if len(text) < 2 or text[-1] != quote:
            raise ConfigError(f"line {line_no}: unterminated string")
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    if text[0] == "[":
        if text[-1] != "]":
            raise ConfigError(f"line {line_no}: unterminated array")
        return [_parse_value(part, line_no) for part in _split_array(text[1:-1], line_no)]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"line {line_no}: cannot parse value {text!r}") from None


def _split_array(body: str, line_no: int) -> list[str]:
    parts, depth, current = [], 0, []
    in_str: str | None = None
    for ch in body:
        if in_str:
            current.append(ch)
            if ch == in_str:
                in_str = None
            continue
        if ch in "\"'":
            in_str = ch
            current.append(ch)
        elif ch == "[":
            depth += 1
            current.append(ch)
        elif ch == "]":
            depth -= 1
            current.append(ch)
        elif ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if in_str or depth != 0:
        raise ConfigError(f"line {line_no}: unbalanced array or string")
    if "".join(current).strip():
        parts.append("".join(current))
    return parts


def _read_toml_subset(text: str) -> dict:
    data: dict[str, dict] = {}
    section: dict | None = None
    section_name = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {line_no}: malformed section header {raw.strip()!r}")
            section_name = line[1:-1].strip()
            if not section_name:
                raise ConfigError(f"line {line_no}: empty section name")
            section = data.setdefault(section_name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {line_no}: key outside of any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        if key in section:
            raise ConfigError(f"line {line_no}: duplicate key {key!r} in [{section_name}]")
        section[key] = _parse_value(value, line_no)
    return data


def _strip_comment(line: str) -> str:
    out, in_str = [], None
    for ch in line:
        if in_str:
            out.append(ch)
            if ch == in_str:
                in_str = None
        elif ch in "\"'":
            in_str = ch
            out.append(ch)
        elif ch == "#":
            break
        else:
            out.append(ch)
    return "".join(out)


# -- schema ----------------------------------------------------------------

_KNOWN_CASES = ("paraboloid", "dambreak", "custom")

_SCHEMA = {
    "case": {
        "name": str,
        "depth": (int, float),
        "side": (int, float),
        "revolutions": (int, float),
        "breach_y": list,
        "wall_x": list,
        "h_left": (int, float),
        "h_right": (int, float),
        "domain": list,
        "obstacles": list,
        "z": str,
        "h0": str,
        "u0": list,
    },
    "grid": {"n": int, "nx": int, "ny": int},
    "time": {
        "dt": (int, float),
        "dt_dx_ratio": (int, float),
        "cfl_factor": (int, float),
        "t_end": (int, float),
        "revolutions": (int, float),
    },
    "physics": {"g": (int, float), "eps_dry": (int, float)},
    "output": {
        "dir": str,
        "stride": int,
        "snapshots": bool,
        "diagnostics": bool,
        "staggered": bool,
    },
    "convergence": {"grids": list},
}


@dataclass
class RunConfig:
    """Validated run description, defaults applied."""

    case_name: str
    nx: int
    ny: int
    case_options: dict = dc_field(default_factory=dict)
    custom: dict | None = None
    dt: float | None = None
    dt_dx_ratio: float | None = None
    cfl_factor: float | None = None
    t_end: float | None = None
    revolutions: float | None = None
    g: float | None = None
    eps_dry: float | None = None
    out_dir: str = "out"
    stride: int = 0
    snapshots: bool = True
    diagnostics: bool = True
    staggered: bool = False
    convergence_grids: list | None = None


def parse_config(path) -> RunConfig:
    """Read and validate a configuration file."""
    with open(path, encoding="utf-8") as fh:
        data = _read_toml_subset(fh.read())

    for section, keys in data.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in keys.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            expected = _SCHEMA[section][key]
            if not isinstance(value, expected) or isinstance(value, bool) != (expected is bool):
                raise ConfigError(
                    f"key {key!r} in [{section}] has the wrong type "
                    f"(got {type(value).__name__})"
                )

    case_sec = dict(data.get("case", {}))
    name = case_sec.pop("name", None)
    if name is None:
        raise ConfigError("missing key 'name' in [case]")
    if name not in _KNOWN_CASES:
        raise ConfigError(f"unknown case {name!r} (choose from {', '.join(_KNOWN_CASES)})")

    custom = None
    if name == "custom":
        custom = case_sec
        for required in ("domain", "h0"):
            if required not in custom:
                raise ConfigError(f"custom case needs key {required!r} in [case]")
    else:
        allowed = {
            "paraboloid": {"depth", "side", "revolutions"},
            "dambreak": {"breach_y", "wall_x", "h_left", "h_right"},
        }[name]
        for key in case_sec:
            if key not in allowed:
                raise ConfigError(f"key {key!r} in [case] does not apply to case {name!r}")

    grid = data.get("grid", {})
    if "n" in grid and ("nx" in grid or "ny" in grid):
        raise ConfigError("give either 'n' or 'nx'/'ny' in [grid], not both")
    if "n" in grid:
        nx = ny = grid["n"]
    elif "nx" in grid:
        nx = grid["nx"]
        ny = grid.get("ny", nx)
    else:
        raise ConfigError("missing key 'grid' resolution: set n (or nx/ny) in [grid]")
    if nx < 1 or ny < 1:
        raise ConfigError("grid resolution must be at least 1")

    time_sec = data.get("time", {})
    dt_modes = [k for k in ("dt", "dt_dx_ratio", "cfl_factor") if k in time_sec]
    if len(dt_modes) > 1:
        raise ConfigError(
            f"conflicting time step settings in [time]: {' and '.join(dt_modes)}"
        )
    if "t_end" in time_sec and "revolutions" in time_sec:
        raise ConfigError("give either 't_end' or 'revolutions' in [time], not both")

    phys = data.get("physics", {})
    out = data.get("output", {})
    conv = data.get("convergence", {})
    grids = conv.get("grids")
    if grids is not None and (not grids or not all(isinstance(g, int) and g >= 10 for g in grids)):
        raise ConfigError("[convergence] grids must be a list of integers >= 10")

    cfg = RunConfig(
        case_name=name,
        case_options=case_sec if name != "custom" else {},
        custom=custom,
        nx=nx,
        ny=ny,
        dt=_opt_float(time_sec.get("dt"), "dt", positive=True),
        dt_dx_ratio=_opt_float(time_sec.get("dt_dx_ratio"), "dt_dx_ratio", positive=True),
        cfl_factor=_opt_float(time_sec.get("cfl_factor"), "cfl_factor", positive=True),
        t_end=_opt_float(time_sec.get("t_end"), "t_end", positive=True),
        revolutions=_opt_float(time_sec.get("revolutions"), "revolutions", positive=True),
        g=_opt_float(phys.get("g"), "g", positive=True),
        eps_dry=_opt_float(phys.get("eps_dry"), "eps_dry", positive=False),
        out_dir=out.get("dir", "out"),
        stride=out.get("stride", 0),
        snapshots=out.get("snapshots", True),
        diagnostics=out.get("diagnostics", True),
        staggered=out.get("staggered", False),
        convergence_grids=grids,
    )
    if cfg.revolutions is not None and name != "paraboloid":
        raise ConfigError("'revolutions' only applies to the paraboloid case")
    if cfg.stride < 0:
        raise ConfigError("output stride must be >= 0")
    return cfg


def _opt_float(value, key: str, positive: bool):
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"key {key!r} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"key {key!r} must be positive")
    if not positive and value < 0:
        raise ConfigError(f"key {key!r} must be nonnegative")
    return value


def build_case(cfg: RunConfig) -> CaseDefinition:
    """Materialize the CaseDefinition a config describes."""
    if cfg.case_name == "paraboloid":
        kw = {}
        if "depth" in cfg.case_options:
            kw["depth"] = float(cfg.case_options["depth"])
        if "side" in cfg.case_options:
            kw["L"] = float(cfg.case_options["side"])
        if cfg.revolutions is not None:
            kw["revolutions"] = cfg.revolutions
        elif "revolutions" in cfg.case_options:
            kw["revolutions"] = float(cfg.case_options["revolutions"])
        if cfg.g is not None:
            kw["g"] = cfg.g
        case = cases_mod.paraboloid_case(**kw)
    elif cfg.case_name == "dambreak":
        kw = {}
        for src, dst in (("wall_x", "wall_x"), ("breach_y", "breach_y"),
                         ("h_left", "h_left"), ("h_right", "h_right")):
            if src in cfg.case_options:
                val = cfg.case_options[src]
                kw[dst] = tuple(float(v) for v in val) if isinstance(val, list) else float(val)
        if cfg.g is not None:
            kw["g"] = cfg.g
        case = cases_mod.dambreak_case(**kw)
    else:
        case = _build_custom_case(cfg)

    if cfg.t_end is not None:
        case.t_end = cfg.t_end
    if cfg.dt_dx_ratio is not None:
        case.dt_dx_ratio = cfg.dt_dx_ratio
    return case


def _build_custom_case(cfg: RunConfig) -> CaseDefinition:
    spec = cfg.custom or {}
    domain = spec["domain"]
    if len(domain) != 4:
        raise ConfigError("custom domain must be [x0, x1, y0, y1]")
    bounds = tuple(float(v) for v in domain)
    obstacles = tuple(
        tuple(float(v) for v in box) for box in spec.get("obstacles", [])
    )
    for box in obstacles:
        if len(box) != 4:
            raise ConfigError("each obstacle must be [x0, x1, y0, y1]")

    z_fn = compile_expression(spec["z"]) if "z" in spec else (
        lambda x, y, t=0.0: np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y))
    )
    h0_fn = compile_expression(spec["h0"])
    u0 = spec.get("u0")
    if u0 is not None:
        if len(u0) != 2 or not all(isinstance(e, str) for e in u0):
            raise ConfigError("custom u0 must be a pair of expression strings")
        u1_fn = compile_expression(u0[0])
        u2_fn = compile_expression(u0[1])
        u0_fn = lambda x, y: (u1_fn(x, y), u2_fn(x, y))
    else:
        u0_fn = None

    if cfg.t_end is None:
        raise ConfigError("custom case needs 't_end' in [time]")
    return CaseDefinition(
        name="custom",
        bounds=bounds,
        obstacles=obstacles,
        z=lambda x, y: z_fn(x, y, 0.0),
        h0=lambda x, y: h0_fn(x, y, 0.0),
        u0=u0_fn,
        t_end=cfg.t_end,
        dt_dx_ratio=cfg.dt_dx_ratio if cfg.dt_dx_ratio is not None else 0.1,
        g=cfg.g if cfg.g is not None else 9.81,
    )
