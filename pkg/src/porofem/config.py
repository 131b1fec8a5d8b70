"""INI run configuration: parsing with line-numbered errors, and a canonical dump.

A file overrides a preset. Sections and keys left out keep the preset value;
a ``[bc]`` section, when present, replaces the preset's boundary conditions
as a whole. Values are SI numbers, optionally followed by a unit that is
converted to SI (``dt = 1 hr``).
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, replace

from .assembly import BoundaryConditionSet, DirichletBC, NeumannBC
from .errors import InvalidConfigError
from .problems import PROBLEMS, get_preset

# unit -> (dimension, factor to SI)
UNITS = {
    "m": ("length", 1.0), "cm": ("length", 1e-2), "mm": ("length", 1e-3),
    "s": ("time", 1.0), "min": ("time", 60.0), "hr": ("time", 3600.0), "h": ("time", 3600.0),
    "day": ("time", 86400.0),
    "Pa": ("pressure", 1.0), "kPa": ("pressure", 1e3), "MPa": ("pressure", 1e6), "GPa": ("pressure", 1e9),
    "m^2": ("area", 1.0), "m2": ("area", 1.0),
    "Pa*s": ("viscosity", 1.0), "Pa.s": ("viscosity", 1.0),
    "kg/m^3": ("density", 1.0), "kg/m3": ("density", 1.0),
    "m/s^2": ("acceleration", 1.0), "m/s2": ("acceleration", 1.0),
    "m/s": ("velocity", 1.0),
    "-": ("dimensionless", 1.0),
}
SI_UNIT = {
    "length": "m", "time": "s", "pressure": "Pa", "area": "m^2", "viscosity": "Pa*s",
    "density": "kg/m^3", "acceleration": "m/s^2", "velocity": "m/s", "dimensionless": "-",
}

# (section, key) -> (kind, dimension, description); kind is how the raw text is read
SCHEMA = {
    ("problem", "id"): ("choice", None, "model problem: mp1, mp2 or mp3"),
    ("problem", "initial_p"): ("pressure_or_hydrostatic", "pressure", "initial pore pressure, or 'hydrostatic'"),
    ("problem", "geostatic"): ("bool", None, "start in mechanical equilibrium under gravity"),
    ("domain", "width"): ("float", "length", "domain width"),
    ("domain", "height"): ("float", "length", "domain height"),
    ("domain", "length"): ("float", "length", "column length (1D)"),
    ("discretization", "hx"): ("float", "length", "element size along x"),
    ("discretization", "hy"): ("float", "length", "element size along y"),
    ("discretization", "hz"): ("float", "length", "element size along the 1D column"),
    ("discretization", "element"): ("str", None, "line2 or taylor_hood"),
    ("time", "dt"): ("float", "time", "time step"),
    ("time", "t_end"): ("float", "time", "final time"),
    ("time", "output_times"): ("list", "time", "snapshot times, comma separated"),
    ("material", "lambda"): ("float", "pressure", "Lame constant lambda"),
    ("material", "mu"): ("float", "pressure", "shear modulus"),
    ("material", "k_s"): ("float_inf", "pressure", "solid grain bulk modulus (inf: incompressible)"),
    ("material", "k_w"): ("float_inf", "pressure", "water bulk modulus (inf: incompressible)"),
    ("material", "k"): ("float", "area", "intrinsic permeability"),
    ("material", "mu_w"): ("float", "viscosity", "water dynamic viscosity"),
    ("material", "rho_s"): ("float", "density", "solid grain density"),
    ("material", "rho_w"): ("float", "density", "water density"),
    ("material", "phi0"): ("float", "dimensionless", "reference porosity"),
    ("material", "gravity"): ("float", "acceleration", "gravitational acceleration, acting along -y"),
    ("vangenuchten", "alpha"): ("float", "pressure", "air-entry scale"),
    ("vangenuchten", "n"): ("float", "dimensionless", "shape exponent n"),
    ("vangenuchten", "m"): ("float_auto", "dimensionless", "shape exponent m (auto: 1 - 1/n)"),
    ("vangenuchten", "s_res"): ("float", "dimensionless", "residual saturation"),
    ("vangenuchten", "s_max"): ("float", "dimensionless", "maximum saturation"),
    ("solver", "rel_tol"): ("float", "dimensionless", "Newton relative residual tolerance"),
    ("solver", "abs_tol"): ("float", "dimensionless", "Newton absolute residual tolerance"),
    ("solver", "max_iter"): ("int", None, "Newton iteration cap"),
}
SECTIONS = ("problem", "domain", "discretization", "time", "material", "vangenuchten", "solver", "bc")
BC_DOC = {
    "p": "prescribed pore pressure", "ux": "prescribed displacement x", "uy": "prescribed displacement y",
    "tx": "traction x", "ty": "traction y", "flux": "inflow water flux",
}
BC_DIMENSION = {"p": "pressure", "ux": "length", "uy": "length", "tx": "pressure", "ty": "pressure", "flux": "velocity"}
_NUM_UNIT = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*(\S*)\s*$")

PRESET_ATTR = {
    ("domain", "width"): "width", ("domain", "height"): "height", ("domain", "length"): "length",
    ("discretization", "hx"): "hx", ("discretization", "hy"): "hy", ("discretization", "hz"): "hz",
    ("discretization", "element"): "element",
    ("time", "dt"): "dt", ("time", "t_end"): "t_end", ("time", "output_times"): "output_times",
    ("solver", "rel_tol"): "rel_tol", ("solver", "abs_tol"): "abs_tol", ("solver", "max_iter"): "max_iter",
    ("problem", "initial_p"): "initial_p", ("problem", "geostatic"): "geostatic",
}
MATERIAL_ATTR = {
    "lambda": "lam", "mu": "mu", "k_s": "k_s", "k_w": "k_w", "k": "k", "mu_w": "mu_w",
    "rho_s": "rho_s", "rho_w": "rho_w", "phi0": "phi0", "gravity": "gravity",
}


@dataclass(frozen=True)
class RunConfig:
    preset: object
    source: str | None = None

    @property
    def problem(self):
        return self.preset.problem


class _Errors:
    def __init__(self, lines):
        self.lines = lines
        self.items = []

    def add(self, msg, section=None, key=None, line=None):
        if line is None and section is not None:
            line = self.lines.get((section, key)) or self.lines.get((section, None))
        self.items.append(f"line {line}: {msg}" if line else msg)


def _key_lines(text):
    """Map (section, key) to 1-based line numbers by a light scan of the text."""
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), i)
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), i)
    return out


def parse_quantity(text, dimension, allow_inf=False):
    """Read ``number [unit]`` and return the SI value; raises ValueError."""
    m = _NUM_UNIT.match(text)
    if not m:
        raise ValueError(f"not a number: {text.strip()!r}")
    value = float(m.group(1))
    unit = m.group(2)
    if math.isinf(value) and not allow_inf:
        raise ValueError("inf is not allowed here")
    if math.isnan(value):
        raise ValueError("nan is not allowed")
    if unit:
        if unit not in UNITS:
            raise ValueError(f"unknown unit {unit!r}")
        dim, factor = UNITS[unit]
        if dim != dimension:
            raise ValueError(f"unit mismatch: {unit!r} is a {dim} unit, expected {dimension} ({SI_UNIT[dimension]})")
        value *= factor
    return value


def _read_value(kind, dim, raw):
    s = raw.strip()
    if kind == "choice":
        if s not in PROBLEMS:
            raise ValueError(f"must be one of {', '.join(PROBLEMS)}")
        return s
    if kind == "str":
        return s
    if kind == "bool":
        low = s.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {s!r}")
    if kind == "int":
        if not re.fullmatch(r"[-+]?\d+", s):
            raise ValueError(f"not an integer: {s!r}")
        return int(s)
    if kind == "pressure_or_hydrostatic" and s == "hydrostatic":
        return s
    if kind == "float_auto" and s == "auto":
        return None
    if kind == "list":
        if not s:
            return ()
        return tuple(parse_quantity(part, dim) for part in s.split(","))
    return parse_quantity(s, dim, allow_inf=(kind == "float_inf"))


def _parse_bc(entries, errs):
    dirichlet, neumann, spans = [], [], {}
    for key, raw, line in entries:
        parts = key.split(".")
        if len(parts) == 3 and parts[2] == "span":
            try:
                lo, hi = (parse_quantity(v, "length") for v in raw.split(","))
            except ValueError as exc:
                errs.add(f"bc.{key}: {exc} (expected 'a, b')", line=line)
                continue
            spans[(parts[0], parts[1])] = ((lo, hi), line)
            continue
        if len(parts) != 2 or parts[1] not in BC_DIMENSION:
            errs.add(f"unknown key bc.{key} (use <tag>.<p|ux|uy|tx|ty|flux>[.span])", line=line)
            continue
        tag, fld = parts
        try:
            value = parse_quantity(raw, BC_DIMENSION[fld])
        except ValueError as exc:
            errs.add(f"bc.{key}: {exc}", line=line)
            continue
        if fld in ("p", "ux", "uy"):
            dirichlet.append(DirichletBC(tag, fld, value))
        else:
            neumann.append((tag, fld, value))
    out_n = []
    for tag, fld, value in neumann:
        span = spans.pop((tag, fld), (None, None))[0]
        out_n.append(NeumannBC(tag, fld, value, span=span))
    for (tag, fld), (_, line) in spans.items():
        errs.add(f"bc.{tag}.{fld}.span given without bc.{tag}.{fld}", line=line)
    return BoundaryConditionSet(dirichlet=tuple(dirichlet), neumann=tuple(out_n))


def parse_config_text(text, problem=None, source=None):
    """Parse INI text into a validated :class:`RunConfig`.

    All problems are collected and raised together as one
    :class:`InvalidConfigError` whose ``errors`` lines carry line numbers.
    """
    lines = _key_lines(text)
    errs = _Errors(lines)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise InvalidConfigError("unreadable config", [f"line {line}: {exc.message}" if line else str(exc)]) from None

    values = {}
    bc_entries = None
    for section in cp.sections():
        if section not in SECTIONS:
            errs.add(f"unknown section [{section}]", section, None)
            continue
        if section == "bc":
            bc_entries = [(k, v, lines.get(("bc", k))) for k, v in cp.items("bc")]
            continue
        for key, raw in cp.items(section):
            spec = SCHEMA.get((section, key))
            if spec is None:
                errs.add(f"unknown key {section}.{key}", section, key)
                continue
            kind, dim, _ = spec
            try:
                values[(section, key)] = _read_value(kind, dim, raw)
            except ValueError as exc:
                errs.add(f"{section}.{key}: {exc}", section, key)

    file_problem = values.pop(("problem", "id"), None)
    if problem is None and file_problem is None and ("problem", "id") not in lines:
        errs.add("missing required key problem.id", "problem", None)
    if problem is not None and file_problem is not None and problem != file_problem:
        errs.add(f"problem.id = {file_problem} conflicts with requested problem {problem}", "problem", "id")
    name = problem or file_problem
    if name is None:
        raise InvalidConfigError("invalid config", errs.items or ["missing required key problem.id"])

    preset = get_preset(name)
    kw = {}
    mat = {}
    vg = {}
    for (section, key), v in values.items():
        if section == "material":
            mat[MATERIAL_ATTR[key]] = v
        elif section == "vangenuchten":
            vg[key] = v
        else:
            kw[PRESET_ATTR[(section, key)]] = v
    material = preset.material
    if vg:
        material = replace(material, vg=replace(material.vg, **vg))
    if mat:
        material = replace(material, **mat)
    kw["material"] = material
    if bc_entries is not None:
        kw["bcs"] = _parse_bc(bc_entries, errs)
    preset = replace(preset, **kw)
    for msg in preset.errors():
        m = re.match(r"^([a-z_]+)\.([a-z_0-9]+)", msg)
        key = None
        if m:
            section, key = m.group(1), m.group(2)
            if section == "material" and key == "lam":
                key = "lambda"
        else:
            section = None
        errs.add(msg, section, key)
    if errs.items:
        raise InvalidConfigError("invalid config", errs.items)
    return RunConfig(preset=preset, source=source)


def parse_config(path, problem=None):
    """Read and validate an INI run configuration from ``path``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text, problem=problem, source=str(path))


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def dump_config(preset):
    """Canonical INI text for ``preset``; every key is written with its SI unit."""
    mat = preset.material
    current = {
        ("problem", "id"): preset.problem,
        ("material", "lambda"): mat.lam,
    }
    for (section, key), attr in PRESET_ATTR.items():
        current[(section, key)] = getattr(preset, attr)
    for key, attr in MATERIAL_ATTR.items():
        current[("material", key)] = getattr(mat, attr)
    for key in ("alpha", "n", "m", "s_res", "s_max"):
        current[("vangenuchten", key)] = getattr(mat.vg, key)
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        if section == "bc":
            for bc in preset.bcs.dirichlet:
                out.append(f"# {BC_DOC[bc.field]} [{SI_UNIT[BC_DIMENSION[bc.field]]}]")
                out.append(f"{bc.tag}.{bc.field} = {_fmt(bc.at(0.0))}")
            for bc in preset.bcs.neumann:
                out.append(f"# {BC_DOC[bc.field]} [{SI_UNIT[BC_DIMENSION[bc.field]]}]")
                out.append(f"{bc.tag}.{bc.field} = {_fmt(bc.at(0.0))}")
                if bc.span is not None:
                    out.append(f"{bc.tag}.{bc.field}.span = {_fmt(bc.span[0])}, {_fmt(bc.span[1])}")
        for (sec, key), (kind, dim, doc) in SCHEMA.items():
            if sec != section:
                continue
            v = current[(sec, key)]
            unit = f" [{SI_UNIT[dim]}]" if dim else ""
            out.append(f"# {doc}{unit}")
            if kind == "list":
                out.append(f"{key} = {', '.join(_fmt(t) for t in v)}")
            else:
                out.append(f"{key} = {_fmt(v)}")
        out.append("")
    return "\n".join(out)


def write_config(preset, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(preset))
