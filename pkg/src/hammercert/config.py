"""INI problem files: parsing with line-level errors, serialisation, and ProblemSpec assembly.

Layout::

    [problem]       name
    [kernel]        preset | custom, a, b, c, weight (expression in s)
    [terms]         lower / upper: one "role | coef(t) | functional" per line
    [nonlinearity]  f(t,u,v), f1(t,u), f2(t,u), f2_upper(rho), f1_lower(rho,c),
                    f2_at_0 ... f1_at_inf, attest_* flags
    [operators]     boundary: one "h(t,x) | functional" per line; deviation; eta(t)
    [certify]       rho list, limits (analytic | sampled | none)
    [solver]        method, u0, damping, tol, max_iter, nodes

Functionals are written ``min_window``, ``max_window``, ``point:tau``,
``stieltjes:density(t)`` or ``stieltjes(tau:mass, ...; density=expr)``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import expr
from .errors import ConfigError, ExpressionError
from .functionals import FunctionalSpec, Term
from .kernels import finalize_kernel, preset, registered_kernel
from .problem import LIMIT_KEYS, BoundaryOperator, Declarations, DeviationOperator, ProblemSpec

SECTIONS = ("problem", "kernel", "terms", "nonlinearity", "operators", "certify", "solver")
LIMITS_MODES = ("analytic", "sampled", "none")
_POINT = re.compile(r"^point(?::\s*(.+)|\(\s*([^)]+?)\s*\))$")
_STIELTJES = re.compile(r"^stieltjes\((.*)\)$")


@dataclass(frozen=True)
class FunctionalConfig:
    kind: str
    tau: float | None = None
    atoms: tuple[tuple[float, float], ...] = ()
    density: str | None = None

    def render(self) -> str:
        if self.kind == "point":
            return f"point:{_fmt(self.tau)}"
        if self.kind == "stieltjes" and not self.atoms and self.density is not None:
            return f"stieltjes:{self.density}"
        if self.kind == "stieltjes":
            inner = ", ".join(f"{_fmt(t)}:{_fmt(m)}" for t, m in self.atoms)
            if self.density is not None:
                inner = f"{inner}; density={self.density}" if inner else f"; density={self.density}"
            return f"stieltjes({inner})"
        return self.kind

    def build(self, family: str) -> FunctionalSpec:
        density = None if self.density is None else expr.parse(self.density, ("t",))
        return FunctionalSpec(self.kind, family, tau=self.tau, atoms=self.atoms, density=density)


@dataclass(frozen=True)
class TermConfig:
    role: str
    coef: str
    functional: FunctionalConfig

    def render(self) -> str:
        return f"{self.role} | {self.coef} | {self.functional.render()}"


@dataclass(frozen=True)
class BoundaryConfig:
    h: str
    functional: FunctionalConfig

    def render(self) -> str:
        return f"{self.h} | {self.functional.render()}"


@dataclass(frozen=True)
class SolverConfig:
    method: str = "picard"
    u0: float | None = None
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 500
    nodes: int = 129


@dataclass(frozen=True)
class ProblemConfig:
    name: str
    kernel: str
    a: float
    b: float
    f: str
    f1: str
    f2: str
    custom_kernel: bool = False
    c: float | None = None
    weight: str = "1"
    lower: tuple[TermConfig, ...] = ()
    upper: tuple[TermConfig, ...] = ()
    f2_upper: str | None = None
    f1_lower: str | None = None
    limits: tuple[tuple[str, float], ...] = ()
    attest_nonexistence_1: bool = False
    attest_nonexistence_2: bool = False
    attest_order_preserving: bool = False
    boundary: tuple[BoundaryConfig, ...] = ()
    deviation: str = "none"
    eta: str | None = None
    rho: tuple[float, ...] = ()
    limits_mode: str = "analytic"
    solver: SolverConfig = field(default_factory=SolverConfig)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


# ---------------------------------------------------------------------------
# parsing


class _Reader:
    """configparser plus a (section, key) -> line map for error reporting."""

    def __init__(self, text: str, origin: str):
        self.origin = origin
        self.parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        self.lines: dict[tuple[str, str | None], int] = {}
        section = None
        for no, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            m = re.match(r"^\[([^\]]+)\]", stripped)
            if m:
                section = m.group(1).strip()
                self.lines[(section, None)] = no
            elif section and stripped and not stripped.startswith(("#", ";")) and not line[0].isspace():
                key = re.split(r"[=:]", stripped, maxsplit=1)[0].strip().lower()
                self.lines.setdefault((section, key), no)
        try:
            self.parser.read_string(text, source=origin)
        except configparser.Error as exc:
            raise ConfigError(f"{origin}: {exc}", line=getattr(exc, "lineno", None)) from None
        unknown = [s for s in self.parser.sections() if s not in SECTIONS]
        if unknown:
            raise ConfigError(f"unknown section [{unknown[0]}]", section=unknown[0],
                              line=self.lines.get((unknown[0], None)))

    def error(self, message: str, section: str, key: str | None = None, cls=ConfigError):
        line = self.lines.get((section, key), self.lines.get((section, None)))
        return cls(f"{message} (in {self.origin})", section=section, key=key, line=line)

    def get(self, section: str, key: str, default=None, required: bool = False) -> str | None:
        if self.parser.has_option(section, key):
            value = self.parser.get(section, key).strip()
            return value if value != "" else default
        if required:
            raise self.error("missing required key", section, key)
        return default

    def number(self, section: str, key: str, default=None, required=False, kind=float):
        raw = self.get(section, key, None, required)
        if raw is None:
            return default
        try:
            return kind(float(raw)) if kind is int else kind(raw)
        except ValueError:
            raise self.error(f"expected a number, got {raw!r}", section, key) from None

    def flag(self, section: str, key: str) -> bool:
        raw = self.get(section, key)
        if raw is None:
            return False
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise self.error(f"expected a boolean, got {raw!r}", section, key)

    def expression(self, section: str, key: str, variables, required=False) -> str | None:
        raw = self.get(section, key, None, required)
        if raw is not None:
            self.check_expression(raw, variables, section, key)
        return raw

    def check_expression(self, raw: str, variables, section: str, key: str) -> None:
        try:
            expr.parse(raw, variables)
        except ExpressionError as exc:
            raise self.error(str(exc), section, key, ExpressionError) from None


def _parse_functional(token: str, reader: _Reader, section: str, key: str) -> FunctionalConfig:
    token = token.strip()
    if token in ("min_window", "max_window"):
        return FunctionalConfig(token)
    m = _POINT.match(token)
    if m:
        try:
            return FunctionalConfig("point", tau=float(m.group(1) or m.group(2)))
        except ValueError:
            raise reader.error(f"bad point location in {token!r}", section, key) from None
    if token.startswith("stieltjes:"):
        density = token[len("stieltjes:"):].strip()
        reader.check_expression(density, ("t",), section, key)
        return FunctionalConfig("stieltjes", density=density)
    m = _STIELTJES.match(token)
    if m:
        atoms_part, _, density_part = m.group(1).partition(";")
        atoms = []
        for item in filter(None, (p.strip() for p in atoms_part.split(","))):
            try:
                tau, mass = (float(x) for x in item.split(":"))
            except ValueError:
                raise reader.error(f"bad atom {item!r} (want tau:mass)", section, key) from None
            atoms.append((tau, mass))
        density = None
        density_part = density_part.strip()
        if density_part:
            if not density_part.startswith("density="):
                raise reader.error(f"expected density=... in {token!r}", section, key)
            density = density_part[len("density="):].strip()
            reader.check_expression(density, ("t",), section, key)
        return FunctionalConfig("stieltjes", atoms=tuple(atoms), density=density)
    raise reader.error(f"unknown functional {token!r}", section, key)


def _parse_terms(reader: _Reader, key: str) -> tuple[TermConfig, ...]:
    raw = reader.get("terms", key, "")
    out = []
    for line in filter(None, (x.strip() for x in raw.splitlines())):
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3 or parts[0] not in ("gamma", "delta"):
            raise reader.error(f"term line {line!r} must read 'gamma|delta | coef | functional'",
                               "terms", key)
        reader.check_expression(parts[1], ("t",), "terms", key)
        out.append(TermConfig(parts[0], parts[1], _parse_functional(parts[2], reader, "terms", key)))
    return tuple(out)


def _parse_boundary(reader: _Reader) -> tuple[BoundaryConfig, ...]:
    raw = reader.get("operators", "boundary", "")
    out = []
    for line in filter(None, (x.strip() for x in raw.splitlines())):
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 2:
            raise reader.error(f"boundary line {line!r} must read 'h(t,x) | functional'",
                               "operators", "boundary")
        reader.check_expression(parts[0], ("t", "x"), "operators", "boundary")
        out.append(BoundaryConfig(parts[0], _parse_functional(parts[1], reader, "operators",
                                                              "boundary")))
    return tuple(out)


def parse_config(text: str, origin: str = "<config>") -> ProblemConfig:
    r = _Reader(text, origin)
    preset_id = r.get("kernel", "preset")
    custom_id = r.get("kernel", "custom")
    if (preset_id is None) == (custom_id is None):
        raise r.error("give exactly one of 'preset' or 'custom'", "kernel")
    limits = []
    for key in LIMIT_KEYS:
        val = r.number("nonlinearity", key)
        if val is not None:
            if not val >= 0:
                raise r.error("limits must be >= 0", "nonlinearity", key)
            limits.append((key, val))
    rho_raw = r.get("certify", "rho", "")
    try:
        rho = tuple(float(x) for x in re.split(r"[,\s]+", rho_raw) if x)
    except ValueError:
        raise r.error(f"bad rho list {rho_raw!r}", "certify", "rho") from None
    if any(not x > 0 for x in rho):
        raise r.error("rho values must be positive", "certify", "rho")
    limits_mode = r.get("certify", "limits", "analytic")
    if limits_mode not in LIMITS_MODES:
        raise r.error(f"limits must be one of {LIMITS_MODES}", "certify", "limits")
    deviation = r.get("operators", "deviation", "none")
    if deviation not in ("none", "identity", "compose"):
        raise r.error("deviation must be none, identity or compose", "operators", "deviation")
    eta = r.expression("operators", "eta", ("t",), required=deviation == "compose")
    u0 = r.number("solver", "u0")
    solver = SolverConfig(
        method=r.get("solver", "method", "picard"),
        u0=u0,
        damping=r.number("solver", "damping", 0.5),
        tol=r.number("solver", "tol", 1e-10),
        max_iter=r.number("solver", "max_iter", 500, kind=int),
        nodes=r.number("solver", "nodes", 129, kind=int),
    )
    if solver.method not in ("picard", "anderson", "newton"):
        raise r.error("method must be picard, anderson or newton", "solver", "method")
    if solver.nodes < 33:
        raise r.error("need at least 33 nodes", "solver", "nodes")
    return ProblemConfig(
        name=r.get("problem", "name", "problem"),
        kernel=preset_id if preset_id is not None else custom_id,
        custom_kernel=custom_id is not None,
        a=r.number("kernel", "a", required=True),
        b=r.number("kernel", "b", required=True),
        c=r.number("kernel", "c"),
        weight=r.expression("kernel", "weight", ("s",)) or "1",
        lower=_parse_terms(r, "lower"),
        upper=_parse_terms(r, "upper"),
        f=r.expression("nonlinearity", "f", ("t", "u", "v"), required=True),
        f1=r.expression("nonlinearity", "f1", ("t", "u"), required=True),
        f2=r.expression("nonlinearity", "f2", ("t", "u"), required=True),
        f2_upper=r.expression("nonlinearity", "f2_upper", ("rho",)),
        f1_lower=r.expression("nonlinearity", "f1_lower", ("rho", "c")),
        limits=tuple(limits),
        attest_nonexistence_1=r.flag("nonlinearity", "attest_nonexistence_1"),
        attest_nonexistence_2=r.flag("nonlinearity", "attest_nonexistence_2"),
        attest_order_preserving=r.flag("nonlinearity", "attest_order_preserving"),
        boundary=_parse_boundary(r),
        deviation=deviation,
        eta=eta,
        rho=rho,
        limits_mode=limits_mode,
        solver=solver,
    )


def load_config(path) -> ProblemConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, str(path))


# ---------------------------------------------------------------------------
# serialisation


def serialize_config(cfg: ProblemConfig) -> str:
    out = ["[problem]", f"name = {cfg.name}", "", "[kernel]"]
    out.append(f"{'custom' if cfg.custom_kernel else 'preset'} = {cfg.kernel}")
    out += [f"a = {_fmt(cfg.a)}", f"b = {_fmt(cfg.b)}"]
    if cfg.c is not None:
        out.append(f"c = {_fmt(cfg.c)}")
    out += [f"weight = {cfg.weight}", "", "[terms]"]
    for key, terms in (("lower", cfg.lower), ("upper", cfg.upper)):
        out.append(f"{key} =")
        out += [f"    {t.render()}" for t in terms]
    out += ["", "[nonlinearity]", f"f = {cfg.f}", f"f1 = {cfg.f1}", f"f2 = {cfg.f2}"]
    if cfg.f2_upper is not None:
        out.append(f"f2_upper = {cfg.f2_upper}")
    if cfg.f1_lower is not None:
        out.append(f"f1_lower = {cfg.f1_lower}")
    out += [f"{k} = {_fmt(v)}" for k, v in cfg.limits]
    for flag in ("attest_nonexistence_1", "attest_nonexistence_2", "attest_order_preserving"):
        out.append(f"{flag} = {str(getattr(cfg, flag)).lower()}")
    out += ["", "[operators]", "boundary ="]
    out += [f"    {p.render()}" for p in cfg.boundary]
    out.append(f"deviation = {cfg.deviation}")
    if cfg.eta is not None:
        out.append(f"eta = {cfg.eta}")
    out += ["", "[certify]", ("rho = " + ", ".join(_fmt(r) for r in cfg.rho)).rstrip(),
            f"limits = {cfg.limits_mode}", "", "[solver]"]
    s = cfg.solver
    out.append(f"method = {s.method}")
    if s.u0 is not None:
        out.append(f"u0 = {_fmt(s.u0)}")
    out += [f"damping = {_fmt(s.damping)}", f"tol = {_fmt(s.tol)}", f"max_iter = {s.max_iter}",
            f"nodes = {s.nodes}", ""]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# assembly


def _scalar(fun):
    return lambda *args: float(fun(*args))


def build_problem(cfg: ProblemConfig) -> ProblemSpec:
    """Turn a parsed config into a ProblemSpec with finalised kernel constants."""
    weight = expr.parse(cfg.weight, ("s",))
    try:
        if cfg.custom_kernel:
            factory = registered_kernel(cfg.kernel)
            if factory is None:
                raise ConfigError(f"no kernel registered under {cfg.kernel!r}", section="kernel",
                                  key="custom")
            kernel = factory(a=cfg.a, b=cfg.b, c=cfg.c)
            if cfg.weight != "1":
                kernel = kernel.with_constants(weight=weight)
        else:
            kw = {} if cfg.weight == "1" else {"weight": weight}
            kernel = preset(cfg.kernel, cfg.a, cfg.b, cfg.c, **kw).kernel
        kernel = finalize_kernel(kernel)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), section="kernel", key="preset") from None
    except ValueError as exc:
        raise ConfigError(str(exc), section="kernel") from None

    def terms(items, family):
        return tuple(Term(t.role, expr.parse(t.coef, ("t",)), t.functional.build(family), t.coef)
                     for t in items)

    decl = Declarations(
        f2_upper=None if cfg.f2_upper is None else _scalar(expr.parse(cfg.f2_upper, ("rho",))),
        f1_lower=None if cfg.f1_lower is None else _scalar(expr.parse(cfg.f1_lower, ("rho", "c"))),
        limits=dict(cfg.limits),
        attest_nonexistence_1=cfg.attest_nonexistence_1,
        attest_nonexistence_2=cfg.attest_nonexistence_2,
        attest_order_preserving=cfg.attest_order_preserving,
    )
    boundary = BoundaryOperator(tuple((expr.parse(p.h, ("t", "x")), p.functional.build("upper"))
                                      for p in cfg.boundary))
    eta = None if cfg.eta is None else expr.parse(cfg.eta, ("t",))
    deviation = DeviationOperator(cfg.deviation, eta if cfg.deviation == "compose" else None)
    try:
        return ProblemSpec(kernel, expr.parse(cfg.f, ("t", "u", "v")), expr.parse(cfg.f1, ("t", "u")),
                           expr.parse(cfg.f2, ("t", "u")), terms(cfg.lower, "lower"),
                           terms(cfg.upper, "upper"), boundary, deviation, decl,
                           cfg.solver.nodes, cfg.name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
