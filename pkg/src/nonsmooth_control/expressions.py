"""Tiny arithmetic language for analytic fields over the node coordinates.

Expressions are parsed with :mod:`ast` and only a whitelist of nodes is
evaluated, so configuration files cannot execute arbitrary code.  In 1D the
coordinate is ``x``; in 2D it is ``x1``, ``x2`` (``x`` aliases ``x1``).
"""

from __future__ import annotations

import ast
import operator

import numpy as np

FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh,
    "max": np.maximum, "min": np.minimum,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_BINARY = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


class ExpressionError(ValueError):
    """Malformed or disallowed expression."""


def _compile(text: str) -> ast.Expression:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return tree


def _eval(node: ast.AST, names: dict[str, object]):
    if isinstance(node, ast.Expression):
        return _eval(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        return _BINARY[type(node.op)](_eval(node.left, names), _eval(node.right, names))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_eval(node.operand, names))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        if node.func.id not in FUNCTIONS:
            raise ExpressionError(f"unknown function {node.func.id!r}")
        return FUNCTIONS[node.func.id](*(_eval(a, names) for a in node.args))
    raise ExpressionError(f"disallowed syntax: {ast.dump(node)[:60]}")


def variable_names(dim: int) -> tuple[str, ...]:
    return ("x",) if dim == 1 else ("x1", "x2")


def evaluate(text: str, coordinates: tuple[np.ndarray, ...]) -> np.ndarray:
    """Evaluate ``text`` at the given coordinate arrays.

    Examples
    --------
    >>> evaluate("4*x*(1 - x) - 0.3", (np.array([0.5]),))
    array([0.7])
    """
    names: dict[str, object] = dict(CONSTANTS)
    if len(coordinates) == 1:
        names["x"] = coordinates[0]
    else:
        names.update(x=coordinates[0], x1=coordinates[0], x2=coordinates[1])
    with np.errstate(all="ignore"):
        out = np.asarray(_eval(_compile(text), names), dtype=float)
    out = np.broadcast_to(out, np.shape(coordinates[0])).copy()
    if not np.all(np.isfinite(out)):
        raise ExpressionError(f"expression {text!r} is not finite on the grid")
    return out


def sample_expression(grid, text: str) -> np.ndarray:
    """Nodal values of an expression on the interior nodes of ``grid``."""
    return evaluate(text, grid.coordinates())
