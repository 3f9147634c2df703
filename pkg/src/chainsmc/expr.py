"""Side-effect-free expression trees over model variables and clocks.

Expressions appear in transition guards, update right-hand sides, timing
bounds, connector actions and state-dependent gate probabilities.  They are
built either directly from the node classes or with Python operators on
existing nodes:

    var("balance") >= lit(30)
    (var("goods") > 0) & var("open").eq(1)

``==``/``!=`` keep their structural meaning on nodes (useful in tests), so
comparison atoms are built with ``.eq()`` / ``.ne()``.

Two value kinds exist: numeric (int and real are not distinguished) and
boolean.  ``infer_type`` checks a tree against a name->kind environment;
``eval_expr`` assumes the tree already type-checked and only reports dynamic
errors (unbound names, division by zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from .errors import DivisionByZeroError, ExprTypeError, UnboundNameError

NUM = "num"
BOOL = "bool"

Value = Union[bool, int, float]

_ARITH = {"+", "-", "*", "/"}
_CMP = {"<", "<=", ">", ">=", "==", "!="}
_LOGIC = {"and", "or"}


class Expr:
    """Base node.  Subclasses are frozen dataclasses, so trees are immutable,
    hashable and picklable."""

    __slots__ = ()

    # -- builder sugar ------------------------------------------------------

    def __add__(self, other):
        return BinOp("+", self, wrap(other))

    def __radd__(self, other):
        return BinOp("+", wrap(other), self)

    def __sub__(self, other):
        return BinOp("-", self, wrap(other))

    def __rsub__(self, other):
        return BinOp("-", wrap(other), self)

    def __mul__(self, other):
        return BinOp("*", self, wrap(other))

    def __rmul__(self, other):
        return BinOp("*", wrap(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, wrap(other))

    def __rtruediv__(self, other):
        return BinOp("/", wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def __lt__(self, other):
        return BinOp("<", self, wrap(other))

    def __le__(self, other):
        return BinOp("<=", self, wrap(other))

    def __gt__(self, other):
        return BinOp(">", self, wrap(other))

    def __ge__(self, other):
        return BinOp(">=", self, wrap(other))

    def eq(self, other) -> "BinOp":
        return BinOp("==", self, wrap(other))

    def ne(self, other) -> "BinOp":
        return BinOp("!=", self, wrap(other))

    def __and__(self, other):
        return BinOp("and", self, wrap(other))

    def __rand__(self, other):
        return BinOp("and", wrap(other), self)

    def __or__(self, other):
        return BinOp("or", self, wrap(other))

    def __ror__(self, other):
        return BinOp("or", wrap(other), self)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Lit(Expr):
    value: Value

    def __repr__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    """Reference to a variable or clock: bare (``balance``) inside a
    component, dotted (``seller.goods``) in global contexts."""

    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __repr__(self):
        return f"({self.left!r} {self.op} {self.right!r})"


@dataclass(frozen=True)
class Not(Expr):
    child: Expr

    def __repr__(self):
        return f"(not {self.child!r})"


@dataclass(frozen=True)
class Neg(Expr):
    child: Expr

    def __repr__(self):
        return f"(-{self.child!r})"


def lit(value: Value) -> Lit:
    return Lit(value)


def var(name: str) -> Var:
    return Var(name)


def wrap(value) -> Expr:
    """Coerce a Python scalar to a Lit; pass expression nodes through."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (bool, int, float)):
        return Lit(value)
    raise TypeError(f"cannot use {value!r} in an expression")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_expr(expr: Expr, env: Mapping[str, Value]) -> Value:
    """Evaluate ``expr`` against ``env`` (any mapping from name to value).

    Raises UnboundNameError for missing names and DivisionByZeroError for a
    zero denominator.  Assumes the tree is well-typed; see ``infer_type``.
    """
    t = type(expr)
    if t is Lit:
        return expr.value
    if t is Var:
        try:
            return env[expr.name]
        except KeyError:
            raise UnboundNameError(expr.name) from None
    if t is BinOp:
        op = expr.op
        # 'and'/'or' are strict (both sides crash on unbound names); guards
        # in validated models never rely on short-circuiting.
        a = eval_expr(expr.left, env)
        b = eval_expr(expr.right, env)
        if op == "and":
            return a and b
        if op == "or":
            return a or b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise DivisionByZeroError(f"division by zero in {expr!r}")
            return a / b
        raise ExprTypeError(f"unknown operator {op!r}")
    if t is Not:
        return not eval_expr(expr.child, env)
    if t is Neg:
        return -eval_expr(expr.child, env)
    raise ExprTypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Static type checking
# ---------------------------------------------------------------------------

def infer_type(expr: Expr, types: Mapping[str, str]) -> str:
    """Return NUM or BOOL for a well-typed tree.

    ``types`` maps visible names to NUM/BOOL.  Raises ExprTypeError on kind
    mismatches and UnboundNameError on names missing from ``types``.
    """
    t = type(expr)
    if t is Lit:
        return BOOL if isinstance(expr.value, bool) else NUM
    if t is Var:
        try:
            return types[expr.name]
        except KeyError:
            raise UnboundNameError(expr.name) from None
    if t is BinOp:
        lk = infer_type(expr.left, types)
        rk = infer_type(expr.right, types)
        op = expr.op
        if op in _ARITH:
            if lk != NUM or rk != NUM:
                raise ExprTypeError(f"arithmetic needs numeric operands: {expr!r}")
            return NUM
        if op in _CMP:
            if lk != NUM or rk != NUM:
                raise ExprTypeError(f"comparison needs numeric operands: {expr!r}")
            return BOOL
        if op in _LOGIC:
            if lk != BOOL or rk != BOOL:
                raise ExprTypeError(f"'{op}' needs boolean operands: {expr!r}")
            return BOOL
        raise ExprTypeError(f"unknown operator {op!r}")
    if t is Not:
        if infer_type(expr.child, types) != BOOL:
            raise ExprTypeError(f"'not' needs a boolean operand: {expr!r}")
        return BOOL
    if t is Neg:
        if infer_type(expr.child, types) != NUM:
            raise ExprTypeError(f"negation needs a numeric operand: {expr!r}")
        return NUM
    raise ExprTypeError(f"not an expression node: {expr!r}")


def referenced_names(expr: Expr) -> set[str]:
    """All variable/clock names a tree mentions."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        t = type(node)
        if t is Var:
            out.add(node.name)
        elif t is BinOp:
            stack.append(node.left)
            stack.append(node.right)
        elif t in (Not, Neg):
            stack.append(node.child)
    return out
