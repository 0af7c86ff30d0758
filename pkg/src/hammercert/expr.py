"""Safe numpy-vectorised arithmetic expressions for config files.

Expressions are parsed with :mod:`ast` and checked against a whitelist of
node types, names and functions before being compiled.  ``^`` is accepted as
a power operator with the precedence of ``**``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionError

FUNCTIONS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "min": np.minimum, "max": np.maximum,
    "pos": lambda x: np.maximum(x, 0.0),
    "where": np.where,
}
CONSTANTS = {"pi": math.pi, "e": math.e, "inf": math.inf}

_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
    ast.Compare, ast.Lt, ast.LtE, ast.Gt, ast.GtE,
)


@dataclass(frozen=True, eq=False)
class Expression:
    """A compiled expression in the given variables; callable with keyword arrays."""

    source: str
    variables: tuple[str, ...]
    _code: object = field(repr=False, default=None)

    def __call__(self, *args, **kwargs):
        env = dict(zip(self.variables, args))
        env.update(kwargs)
        missing = [v for v in self.variables if v not in env]
        if missing:
            raise ExpressionError(f"missing variables {missing} for {self.source!r}")
        scope = {**CONSTANTS, **FUNCTIONS, **{k: np.asarray(v, dtype=float) for k, v in env.items()}}
        with np.errstate(all="ignore"):
            out = eval(self._code, {"__builtins__": {}}, scope)  # noqa: S307 (whitelisted AST)
        shape = np.broadcast(*[scope[v] for v in self.variables]).shape if self.variables else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    def __eq__(self, other):
        return isinstance(other, Expression) and (self.source, self.variables) == (
            other.source, other.variables)

    def __hash__(self):
        return hash((self.source, self.variables))

    def __str__(self):
        return self.source

    @property
    def is_zero(self) -> bool:
        try:
            return float(ast.literal_eval(self.source.strip())) == 0.0
        except (ValueError, SyntaxError):
            return False


def parse(source: str, variables=("t", "u", "v")) -> Expression:
    """Compile ``source``; raise :class:`ExpressionError` on anything outside the grammar."""
    text = str(source).strip()
    if not text:
        raise ExpressionError("empty expression")
    try:
        # '^' must bind like '**', so it is substituted before parsing
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    allowed_names = set(variables) | set(FUNCTIONS) | set(CONSTANTS)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ExpressionError(f"{type(node).__name__} not allowed in {text!r}")
        if isinstance(node, ast.Name) and node.id not in allowed_names:
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"unknown function in {text!r}")
            if node.keywords:
                raise ExpressionError(f"keyword arguments not allowed in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals allowed in {text!r}")
    code = compile(tree, "<expression>", "eval")
    return Expression(text, tuple(variables), code)
