"""Bounded metric temporal logic over piecewise-constant trace signals.

Formulas are evaluated pointwise with three-valued semantics: a verdict is
TRUE or FALSE when the trace decides it, INCONCLUSIVE when the horizon is too
short and no early witness exists.  Signals are right-continuous: a variable
holds its value from one observation point up to (not including) the next,
and the last point's values extend to the horizon.

Concrete syntax (braces are interchangeable with parentheses):

    atom      :=  name cmp number          cmp in  < <= > >= == !=
    formula   :=  !f  |  f && f  |  f || f
               |  F[a,b](f)  |  G[a,b](f)  |  f U[a,b] f  |  (f)
"""

from __future__ import annotations

import math
import re
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum

from .errors import (
    BadIntervalError,
    FormulaSyntaxError,
    UnknownVariableError,
)
from .kernel import Trace


class Truth(Enum):
    TRUE = "TRUE"
    FALSE = "FALSE"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class Verdict:
    value: Truth
    witness_time: float | None = None

    @property
    def decided(self) -> bool:
        return self.value is not Truth.INCONCLUSIVE


# ---------------------------------------------------------------------------
# Formula nodes
# ---------------------------------------------------------------------------

class Formula:
    __slots__ = ()


_CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")


@dataclass(frozen=True)
class Atom(Formula):
    name: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in _CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def holds(self, value) -> bool:
        op = self.op
        c = self.threshold
        if op == "<":
            return value < c
        if op == "<=":
            return value <= c
        if op == ">":
            return value > c
        if op == ">=":
            return value >= c
        if op == "==":
            return value == c
        return value != c


@dataclass(frozen=True)
class NotF(Formula):
    child: Formula


@dataclass(frozen=True)
class AndF(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class OrF(Formula):
    left: Formula
    right: Formula


def _check_interval(lo: float, hi: float):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise BadIntervalError(f"interval bounds must be finite: [{lo}, {hi}]")
    if lo < 0 or hi < 0:
        raise BadIntervalError(f"interval bounds must be non-negative: [{lo}, {hi}]")
    if lo > hi:
        raise BadIntervalError(f"interval bounds out of order: [{lo}, {hi}]")


@dataclass(frozen=True)
class Finally(Formula):
    lo: float
    hi: float
    child: Formula

    def __post_init__(self):
        _check_interval(self.lo, self.hi)


@dataclass(frozen=True)
class Globally(Formula):
    lo: float
    hi: float
    child: Formula

    def __post_init__(self):
        _check_interval(self.lo, self.hi)


@dataclass(frozen=True)
class Until(Formula):
    lo: float
    hi: float
    left: Formula
    right: Formula

    def __post_init__(self):
        _check_interval(self.lo, self.hi)


def required_horizon(formula: Formula) -> float:
    """Trace length needed to decide the formula on every input."""
    t = type(formula)
    if t is Atom:
        return 0.0
    if t is NotF:
        return required_horizon(formula.child)
    if t in (AndF, OrF):
        return max(required_horizon(formula.left), required_horizon(formula.right))
    if t in (Finally, Globally):
        return formula.hi + required_horizon(formula.child)
    if t is Until:
        return formula.hi + max(required_horizon(formula.left),
                                required_horizon(formula.right))
    raise TypeError(f"not a formula: {formula!r}")


def atom_names(formula: Formula) -> set:
    out = set()
    stack = [formula]
    while stack:
        node = stack.pop()
        t = type(node)
        if t is Atom:
            out.add(node.name)
        elif t is NotF:
            stack.append(node.child)
        elif t in (AndF, OrF):
            stack.append(node.left)
            stack.append(node.right)
        elif t in (Finally, Globally):
            stack.append(node.child)
        elif t is Until:
            stack.append(node.left)
            stack.append(node.right)
    return out


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<name>[A-Za-z_]\w*(?:\.[A-Za-z_]\w*)*)
      | (?P<op>&&|\|\||<=|>=|==|!=|[!<>()\[\],])
    """,
    re.X,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(pos, f"unexpected character {text[pos]!r}")
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.peek()
        if val != value or kind == "eof":
            raise FormulaSyntaxError(pos, f"expected {value!r}")
        return self.advance()

    def fail(self, message: str):
        _, _, pos = self.peek()
        raise FormulaSyntaxError(pos, message)

    # grammar: or > and > until > unary

    def parse(self) -> Formula:
        f = self.or_f()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise FormulaSyntaxError(pos, f"trailing input at {val!r}")
        return f

    def or_f(self) -> Formula:
        f = self.and_f()
        while self.peek()[1] == "||":
            self.advance()
            f = OrF(f, self.and_f())
        return f

    def and_f(self) -> Formula:
        f = self.until_f()
        while self.peek()[1] == "&&":
            self.advance()
            f = AndF(f, self.until_f())
        return f

    def until_f(self) -> Formula:
        f = self.unary_f()
        kind, val, _ = self.peek()
        if kind == "name" and val == "U" and self.tokens[self.i + 1][1] == "[":
            self.advance()
            lo, hi = self.interval()
            right = self.until_f()
            return Until(lo, hi, f, right)
        return f

    def unary_f(self) -> Formula:
        kind, val, pos = self.peek()
        if val == "!":
            self.advance()
            return NotF(self.unary_f())
        if kind == "name" and val in ("F", "G") and self.tokens[self.i + 1][1] == "[":
            self.advance()
            lo, hi = self.interval()
            self.expect("(")
            child = self.or_f()
            self.expect(")")
            return Finally(lo, hi, child) if val == "F" else Globally(lo, hi, child)
        if val == "(":
            self.advance()
            f = self.or_f()
            self.expect(")")
            return f
        if kind == "name":
            return self.atom()
        self.fail("expected a formula")

    def interval(self):
        self.expect("[")
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect("]")
        _check_interval(lo, hi)
        return lo, hi

    def number(self) -> float:
        kind, val, pos = self.peek()
        if kind != "num":
            raise FormulaSyntaxError(pos, "expected a number")
        self.advance()
        return float(val)

    def atom(self) -> Formula:
        kind, name, pos = self.advance()
        kind2, op, pos2 = self.peek()
        if kind2 != "op" or op not in _CMP_OPS:
            raise FormulaSyntaxError(pos2, "expected a comparison operator")
        self.advance()
        threshold = self.number()
        return Atom(name, op, threshold)


def parse_formula(text: str) -> Formula:
    """Parse the concrete syntax.  Raises FormulaSyntaxError with the offset
    of the problem, or BadIntervalError for malformed interval bounds."""
    normalized = text.replace("{", "(").replace("}", ")")
    return _Parser(normalized).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

class _Evaluator:
    """Three-valued pointwise evaluation with per-subformula breakpoints.

    A subformula's truth value over time is piecewise constant; its
    breakpoint set (a superset of the instants where it can change) is the
    trace's event times shifted down by the window bounds of the operators
    above.  Quantifying over a window then only needs the window start plus
    the breakpoints inside it.
    """

    def __init__(self, trace: Trace):
        self.trace = trace
        self.times = [p.time for p in trace.points]
        self.horizon = trace.horizon
        self._memo = {}
        self._bp = {}

    def value_at(self, name: str, t: float):
        idx = bisect_right(self.times, t) - 1
        point = self.trace.points[idx]
        try:
            return point.values[name]
        except KeyError:
            raise UnknownVariableError(name) from None

    def breakpoints(self, node: Formula) -> list:
        got = self._bp.get(id(node))
        if got is not None:
            return got
        t = type(node)
        if t is Atom:
            # the horizon is a change point too: known before, None after
            bps = sorted(set(self.times) | {self.horizon})
        elif t is NotF:
            bps = self.breakpoints(node.child)
        elif t in (AndF, OrF):
            bps = sorted(set(self.breakpoints(node.left))
                         | set(self.breakpoints(node.right)))
        elif t in (Finally, Globally):
            child = self.breakpoints(node.child)
            shifted = {0.0}
            for x in child:
                shifted.add(x - node.lo)
                shifted.add(x - node.hi)
            bps = sorted(v for v in shifted if v >= 0.0)
        elif t is Until:
            base = set(self.breakpoints(node.left)) | set(self.breakpoints(node.right))
            shifted = {0.0} | base
            for x in base:
                shifted.add(x - node.lo)
                shifted.add(x - node.hi)
            bps = sorted(v for v in shifted if v >= 0.0)
        else:
            raise TypeError(f"not a formula: {node!r}")
        self._bp[id(node)] = bps
        return bps

    def candidates(self, node: Formula, lo: float, hi: float) -> list:
        """Sample instants covering every value the node takes on [lo, hi].

        Boundary instants are the window ends plus the node's breakpoints
        inside the window.  Between consecutive boundaries the value is
        constant, but a piece can start just after its boundary (a None
        region begins strictly past the last known instant), so midpoints
        are sampled as well instead of assuming right-continuity.
        """
        bps = self.breakpoints(node)
        bounds = [lo]
        i = bisect_right(bps, lo)
        while i < len(bps) and bps[i] < hi:
            bounds.append(bps[i])
            i += 1
        if hi > lo:
            bounds.append(hi)
        out = [bounds[0]]
        for a, b in zip(bounds, bounds[1:]):
            out.append((a + b) / 2.0)
            out.append(b)
        return out

    def sat(self, node: Formula, tau: float):
        """True/False when decided at tau, None when the trace is too short."""
        key = (id(node), tau)
        got = self._memo.get(key, _UNSET)
        if got is not _UNSET:
            return got
        result = self._sat(node, tau)
        self._memo[key] = result
        return result

    def _sat(self, node: Formula, tau: float):
        t = type(node)
        if t is Atom:
            if tau > self.horizon:
                return None
            return node.holds(self.value_at(node.name, tau))
        if t is NotF:
            v = self.sat(node.child, tau)
            return None if v is None else not v
        if t is AndF:
            a = self.sat(node.left, tau)
            if a is False:
                return False
            b = self.sat(node.right, tau)
            if b is False:
                return False
            if a is None or b is None:
                return None
            return True
        if t is OrF:
            a = self.sat(node.left, tau)
            if a is True:
                return True
            b = self.sat(node.right, tau)
            if b is True:
                return True
            if a is None or b is None:
                return None
            return False
        # Past the horizon every subformula is undecided, so a window that
        # sticks out beyond it always contains None instants even though no
        # breakpoint marks them.  Temporal operators fold that in explicitly.
        if t is Finally:
            result = False
            for c in self.candidates(node.child, tau + node.lo, tau + node.hi):
                v = self.sat(node.child, c)
                if v is True:
                    return True
                if v is None:
                    result = None
            if tau + node.hi > self.horizon:
                result = None
            return result
        if t is Globally:
            result = True
            for c in self.candidates(node.child, tau + node.lo, tau + node.hi):
                v = self.sat(node.child, c)
                if v is False:
                    return False
                if v is None:
                    result = None
            if tau + node.hi > self.horizon:
                result = None
            return result
        if t is Until:
            result = False
            for c in self.candidates(node, tau + node.lo, tau + node.hi):
                rv = self.sat(node.right, c)
                if rv is False:
                    continue
                hv = self.hold(node.left, tau, c)
                if hv is False:
                    continue
                if rv is True and hv is True:
                    return True
                result = None  # one side undecided, neither refuted
            if result is False and tau + node.lo <= self.horizon < tau + node.hi:
                # witnesses in (horizon, tau+hi] are undecided unless the
                # left side already failed somewhere on [tau, horizon]
                hv = self.hold(node.left, tau, self.horizon)
                if hv is not False and self.sat(node.left, self.horizon) is not False:
                    result = None
            return result
        raise TypeError(f"not a formula: {node!r}")

    def hold(self, node: Formula, start: float, end: float):
        """Three-valued 'node holds on [start, end)'."""
        if end <= start:
            return True
        result = True
        for c in self.candidates(node, start, end):
            if c >= end:
                break
            v = self.sat(node, c)
            if v is False:
                return False
            if v is None:
                result = None
        return result


_UNSET = object()


def evaluate(formula: Formula, trace: Trace) -> Verdict:
    """Evaluate at trace start.  witness_time is the earliest deciding
    instant for a temporal root (TRUE Finally/Until, FALSE Globally), 0.0 for
    a decided atom, None otherwise."""
    missing = atom_names(formula) - set(trace.points[0].values)
    if missing:
        raise UnknownVariableError(sorted(missing)[0])
    ev = _Evaluator(trace)
    v3 = ev.sat(formula, 0.0)
    if v3 is None:
        return Verdict(Truth.INCONCLUSIVE, None)
    value = Truth.TRUE if v3 else Truth.FALSE
    witness = None
    t = type(formula)
    if t is Atom:
        witness = 0.0
    elif t is Finally and v3 is True:
        for c in ev.candidates(formula.child, formula.lo, formula.hi):
            if ev.sat(formula.child, c) is True:
                witness = c
                break
    elif t is Globally and v3 is False:
        for c in ev.candidates(formula.child, formula.lo, formula.hi):
            if ev.sat(formula.child, c) is False:
                witness = c
                break
    elif t is Until and v3 is True:
        for c in ev.candidates(formula, formula.lo, formula.hi):
            if ev.sat(formula.right, c) is True and ev.hold(formula.left, 0.0, c) is True:
                witness = c
                break
    return Verdict(value, witness)
