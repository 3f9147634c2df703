"""Timed stochastic components, connectors, and the execution engine.

A compound model is a set of named component instances plus connectors that
synchronize their ports.  Execution is discrete-event: at each step every
enabled interaction samples a firing time uniformly from its feasible window,
the earliest one fires (ties broken uniformly at random), and the engine
emits one observation point per distinct firing time.

Ordering inside a firing is fixed: connector actions run first (sequentially,
each seeing the effects of the previous), then each participant in connector
declaration order applies its updates, draws its outcome, resets its clocks
and moves to the target state.  A firing that fails its stochastic gate still
moves the participants (states, clocks, entry times) but skips every data
effect; its label is suffixed with ":failed".
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

from .errors import (
    ExprTypeError,
    ModelValidationError,
    StepLimitExceededError,
    UnboundNameError,
)
from .expr import BOOL, NUM, Expr, Value, eval_expr, infer_type, wrap
from .stochastics import Distribution, RngStream, StateBernoulli, sample

DEFAULT_STEP_LIMIT = 10_000_000

_KIND_TYPES = {"int": NUM, "real": NUM, "bool": BOOL}

_MISSING = object()


# ---------------------------------------------------------------------------
# Definitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariableDef:
    name: str
    kind: str  # "int" | "real" | "bool"
    initial: Value


@dataclass(frozen=True)
class TransitionDef:
    """One edge of a component.

    ``port`` is None for internal transitions.  ``timing`` is the relative
    window [lo, hi] measured from the instant the source state was entered;
    bounds are numbers or expressions over the instance's variables, and hi
    may be None for an open-ended window.  ``outcome`` optionally draws a
    distribution into a variable after the updates run.
    """

    source: str
    target: str
    port: str | None = None
    guard: Expr | None = None
    timing: tuple = (0.0, None)
    updates: tuple = ()
    resets: tuple = ()
    outcome: tuple | None = None  # (Distribution, variable name)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "timing", tuple(self.timing))
        object.__setattr__(
            self, "updates", tuple((name, wrap(ex)) for name, ex in self.updates)
        )
        object.__setattr__(self, "resets", tuple(self.resets))
        if not self.label:
            object.__setattr__(self, "label", f"{self.source}->{self.target}")


@dataclass(frozen=True)
class AtomicComponent:
    """A component type: control states, variables, clocks, ports, edges."""

    name: str
    states: tuple
    initial: str
    variables: tuple = ()
    clocks: tuple = ()
    ports: tuple = ()
    transitions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        variables = tuple(
            v if isinstance(v, VariableDef) else VariableDef(*v) for v in self.variables
        )
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "clocks", tuple(self.clocks))
        object.__setattr__(self, "ports", tuple(self.ports))
        object.__setattr__(self, "transitions", tuple(self.transitions))


@dataclass(frozen=True)
class Connector:
    """Synchronizes one port on each participant instance.

    ``timing`` is relative to the interaction's enabling instant (the latest
    entry time among participants).  ``actions`` assign expressions over the
    global (dotted) state to dotted variables; they may touch instances that
    are not participants.  ``gate`` is an optional success distribution drawn
    at firing time.
    """

    name: str
    participants: tuple  # ((instance_id, port), ...)
    guard: Expr | None = None
    timing: tuple = (0.0, None)
    actions: tuple = ()
    gate: Distribution | None = None

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(tuple(p) for p in self.participants))
        object.__setattr__(self, "timing", tuple(self.timing))
        object.__setattr__(
            self, "actions", tuple((t, wrap(ex)) for t, ex in self.actions)
        )


@dataclass(frozen=True)
class PriorityRule:
    """When ``condition`` holds and both interactions are enabled, the lower
    one is removed from the candidate set."""

    condition: Expr
    higher: str
    lower: str


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    where: str
    message: str


@dataclass(frozen=True, eq=False)
class Interaction:
    """Compiled firing unit: an explicit connector or an implicit
    single-participant wrapper around internal transitions."""

    name: str
    parts: tuple  # ((instance_id, {source_state: (TransitionDef, ...)}), ...)
    guard: Expr | None
    timing: tuple
    actions: tuple
    gate: Distribution | None
    internal: bool


@dataclass
class CompoundModel:
    """A validated, executable composition.  Treat as immutable."""

    instances: tuple  # ((instance_id, AtomicComponent), ...)
    connectors: tuple
    priorities: tuple
    time_unit_label: str
    interactions: tuple = ()
    var_index: tuple = ()  # ((instance_id, var name, dotted name), ...)
    components: dict = field(default_factory=dict)
    has_clocks: bool = False

    @property
    def instance_ids(self) -> tuple:
        return tuple(iid for iid, _ in self.instances)

    @property
    def variables(self) -> tuple:
        """Dotted names of every recorded variable, sorted."""
        return tuple(sorted(d for _, _, d in self.var_index))


# ---------------------------------------------------------------------------
# Construction and validation
# ---------------------------------------------------------------------------

def build_compound(instances: Sequence, connectors: Sequence = (),
                   priorities: Sequence = (), time_unit_label: str = "time") -> CompoundModel:
    """Assemble and validate a compound model.

    Raises ModelValidationError carrying every issue found.  Issue kinds:
    DuplicateInstanceId, UnknownInstance, UnknownPort, UnknownState,
    DuplicateConnector, DanglingPriority, TypeError.
    """
    issues: list[ValidationIssue] = []
    components: dict[str, AtomicComponent] = {}
    inst_list: list[tuple] = []
    for iid, comp in instances:
        if iid in components:
            issues.append(ValidationIssue("DuplicateInstanceId", iid, "instance id reused"))
            continue
        components[iid] = comp
        inst_list.append((iid, comp))

    # Global type environment over dotted names.
    global_types: dict[str, str] = {}
    var_index: list[tuple] = []
    has_clocks = False
    for iid, comp in inst_list:
        seen_vars: set[str] = set()
        for v in comp.variables:
            if v.name in seen_vars:
                issues.append(ValidationIssue("TypeError", f"{iid}.{v.name}", "duplicate variable"))
            seen_vars.add(v.name)
            kind = _KIND_TYPES.get(v.kind)
            if kind is None:
                issues.append(ValidationIssue("TypeError", f"{iid}.{v.name}",
                                              f"unknown kind {v.kind!r}"))
                kind = NUM
            global_types[f"{iid}.{v.name}"] = kind
            var_index.append((iid, v.name, f"{iid}.{v.name}"))
        for c in comp.clocks:
            has_clocks = True
            global_types[f"{iid}.{c}"] = NUM

    def check_expr(expr: Expr, types: Mapping[str, str], expected: str, where: str):
        try:
            got = infer_type(expr, types)
        except UnboundNameError as exc:
            head = exc.name.split(".", 1)[0]
            if "." in exc.name and head not in components:
                issues.append(ValidationIssue("UnknownInstance", where,
                                              f"references unknown instance {head!r}"))
            else:
                issues.append(ValidationIssue("TypeError", where,
                                              f"unbound name {exc.name!r}"))
            return
        except ExprTypeError as exc:
            issues.append(ValidationIssue("TypeError", where, str(exc)))
            return
        if got != expected:
            issues.append(ValidationIssue("TypeError", where,
                                          f"expected {expected}, got {got}"))

    def check_bound(bound, types, where):
        if bound is None:
            return
        if isinstance(bound, Expr):
            check_expr(bound, types, NUM, where)
        elif isinstance(bound, (int, float)):
            if bound < 0:
                issues.append(ValidationIssue("TypeError", where, "negative timing bound"))
        else:
            issues.append(ValidationIssue("TypeError", where,
                                          f"bad timing bound {bound!r}"))

    # Per-component checks.
    local_types: dict[str, dict[str, str]] = {}
    for iid, comp in inst_list:
        types = dict(global_types)
        for v in comp.variables:
            types[v.name] = _KIND_TYPES.get(v.kind, NUM)
        for c in comp.clocks:
            types[c] = NUM
        local_types[iid] = types

        if comp.initial not in comp.states:
            issues.append(ValidationIssue("UnknownState", iid,
                                          f"initial state {comp.initial!r} undeclared"))
        var_names = {v.name for v in comp.variables}
        var_kinds = {v.name: _KIND_TYPES.get(v.kind, NUM) for v in comp.variables}
        for tr in comp.transitions:
            where = f"{iid}:{tr.label}"
            for st in (tr.source, tr.target):
                if st not in comp.states:
                    issues.append(ValidationIssue("UnknownState", where,
                                                  f"state {st!r} undeclared"))
            if tr.port is not None and tr.port not in comp.ports:
                issues.append(ValidationIssue("UnknownPort", where,
                                              f"port {tr.port!r} undeclared"))
            if tr.guard is not None:
                check_expr(tr.guard, types, BOOL, where)
            lo, hi = tr.timing
            check_bound(lo, types, where)
            check_bound(hi, types, where)
            if lo is None:
                issues.append(ValidationIssue("TypeError", where, "missing lower timing bound"))
            for name, ex in tr.updates:
                if name not in var_names:
                    issues.append(ValidationIssue("TypeError", where,
                                                  f"update target {name!r} undeclared"))
                    continue
                check_expr(ex, types, var_kinds[name], where)
            if tr.outcome is not None:
                dist, target = tr.outcome
                if target not in var_names:
                    issues.append(ValidationIssue("TypeError", where,
                                                  f"outcome target {target!r} undeclared"))
                elif var_kinds[target] != NUM:
                    issues.append(ValidationIssue("TypeError", where,
                                                  "outcome target must be numeric"))
                if isinstance(dist, StateBernoulli):
                    check_expr(dist.probability, types, NUM, where)
            for c in tr.resets:
                if c not in comp.clocks:
                    issues.append(ValidationIssue("TypeError", where,
                                                  f"reset of undeclared clock {c!r}"))

    # Explicit connectors.
    interactions: list[Interaction] = []
    inter_names: set[str] = set()
    for conn in connectors:
        where = conn.name
        if conn.name in inter_names:
            issues.append(ValidationIssue("DuplicateConnector", where, "connector name reused"))
        inter_names.add(conn.name)
        parts = []
        seen_insts: set[str] = set()
        ok = True
        for inst, port in conn.participants:
            if inst not in components:
                issues.append(ValidationIssue("UnknownInstance", where,
                                              f"participant {inst!r} undeclared"))
                ok = False
                continue
            if inst in seen_insts:
                issues.append(ValidationIssue("DuplicateInstanceId", where,
                                              f"instance {inst!r} listed twice"))
                ok = False
            seen_insts.add(inst)
            comp = components[inst]
            if port not in comp.ports:
                issues.append(ValidationIssue("UnknownPort", where,
                                              f"port {inst}.{port} undeclared"))
                ok = False
                continue
            by_state: dict[str, tuple] = {}
            for tr in comp.transitions:
                if tr.port == port:
                    by_state.setdefault(tr.source, [])
                    by_state[tr.source].append(tr)
            parts.append((inst, {s: tuple(ts) for s, ts in by_state.items()}))
        if conn.guard is not None:
            check_expr(conn.guard, global_types, BOOL, where)
        lo, hi = conn.timing
        check_bound(lo, global_types, where)
        check_bound(hi, global_types, where)
        for target, ex in conn.actions:
            if target not in global_types:
                head = target.split(".", 1)[0]
                if head not in components:
                    issues.append(ValidationIssue("UnknownInstance", where,
                                                  f"action target {target!r}"))
                else:
                    issues.append(ValidationIssue("TypeError", where,
                                                  f"action target {target!r} undeclared"))
                continue
            check_expr(ex, global_types, global_types[target], where)
        if isinstance(conn.gate, StateBernoulli):
            check_expr(conn.gate.probability, global_types, NUM, where)
        if ok and parts:
            interactions.append(Interaction(
                name=conn.name, parts=tuple(parts), guard=conn.guard,
                timing=conn.timing, actions=conn.actions, gate=conn.gate,
                internal=False,
            ))

    # Implicit single-participant interactions for internal transitions,
    # grouped by label so a priority rule can address them as
    # "<instance>.<label>".
    for iid, comp in inst_list:
        by_label: dict[str, dict[str, list]] = {}
        for tr in comp.transitions:
            if tr.port is None:
                by_label.setdefault(tr.label, {}).setdefault(tr.source, []).append(tr)
        for label, by_state in by_label.items():
            name = f"{iid}.{label}"
            if name in inter_names:
                issues.append(ValidationIssue("DuplicateConnector", name,
                                              "implicit interaction name collides"))
            inter_names.add(name)
            interactions.append(Interaction(
                name=name,
                parts=((iid, {s: tuple(ts) for s, ts in by_state.items()}),),
                guard=None, timing=(0.0, None), actions=(), gate=None,
                internal=True,
            ))

    for rule in priorities:
        where = f"{rule.higher} > {rule.lower}"
        for ref in (rule.higher, rule.lower):
            if ref not in inter_names:
                issues.append(ValidationIssue("DanglingPriority", where,
                                              f"no interaction named {ref!r}"))
        if rule.higher == rule.lower:
            issues.append(ValidationIssue("DanglingPriority", where,
                                          "rule relates an interaction to itself"))
        check_expr(rule.condition, global_types, BOOL, where)

    if issues:
        raise ModelValidationError(issues)

    return CompoundModel(
        instances=tuple(inst_list),
        connectors=tuple(connectors),
        priorities=tuple(priorities),
        time_unit_label=time_unit_label,
        interactions=tuple(interactions),
        var_index=tuple(var_index),
        components=components,
        has_clocks=has_clocks,
    )


# ---------------------------------------------------------------------------
# Runtime state
# ---------------------------------------------------------------------------

@dataclass
class InstanceState:
    state: str
    vars: dict
    clocks: dict
    entered_at: float

    def copy(self) -> "InstanceState":
        return InstanceState(self.state, dict(self.vars), dict(self.clocks), self.entered_at)


class _LocalEnv:
    """Name resolution inside one instance: bare names hit its variables and
    clocks, dotted names read any instance."""

    __slots__ = ("_state", "_vars", "_clocks")

    def __init__(self, state: dict, inst_id: str):
        inst = state[inst_id]
        self._state = state
        self._vars = inst.vars
        self._clocks = inst.clocks

    def __getitem__(self, name: str):
        v = self._vars.get(name, _MISSING)
        if v is not _MISSING:
            return v
        v = self._clocks.get(name, _MISSING)
        if v is not _MISSING:
            return v
        return _dotted_lookup(self._state, name)


class _GlobalEnv:
    """Dotted-name resolution over the whole model state."""

    __slots__ = ("_state",)

    def __init__(self, state: dict):
        self._state = state

    def __getitem__(self, name: str):
        return _dotted_lookup(self._state, name)


def _dotted_lookup(state: dict, name: str):
    inst, dot, var = name.partition(".")
    if dot:
        ist = state.get(inst)
        if ist is not None:
            v = ist.vars.get(var, _MISSING)
            if v is not _MISSING:
                return v
            v = ist.clocks.get(var, _MISSING)
            if v is not _MISSING:
                return v
    raise KeyError(name)


def initial_state(model: CompoundModel) -> dict:
    return {
        iid: InstanceState(
            state=comp.initial,
            vars={v.name: v.initial for v in comp.variables},
            clocks={c: 0.0 for c in comp.clocks},
            entered_at=0.0,
        )
        for iid, comp in model.instances
    }


def _snapshot(model: CompoundModel, state: dict) -> dict:
    return {dotted: state[iid].vars[var] for iid, var, dotted in model.var_index}


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------

@dataclass
class Candidate:
    """An interaction instance that may fire, with its absolute window."""

    interaction: Interaction
    choices: tuple  # one TransitionDef per participant
    window: tuple  # (lo, hi) absolute; hi None = unbounded

    @property
    def name(self) -> str:
        return self.interaction.name


def _eval_bound(bound, env) -> float:
    if isinstance(bound, Expr):
        return float(eval_expr(bound, env))
    return float(bound)


def enabled_interactions(model: CompoundModel, state: dict, now: float) -> list:
    """All candidates that can still fire at or after ``now``, after applying
    priority rules.  Candidate order is canonical (declaration order), so a
    given RNG stream replays identically."""
    genv = _GlobalEnv(state)
    candidates: list[Candidate] = []
    for inter in model.interactions:
        if inter.guard is not None and not eval_expr(inter.guard, genv):
            continue
        options = []
        enabling = 0.0
        feasible = True
        for inst_id, by_state in inter.parts:
            ist = state[inst_id]
            trans = by_state.get(ist.state)
            if not trans:
                feasible = False
                break
            if ist.entered_at > enabling:
                enabling = ist.entered_at
            lenv = _LocalEnv(state, inst_id)
            choice_list = []
            for tr in trans:
                if tr.guard is not None and not eval_expr(tr.guard, lenv):
                    continue
                lo = ist.entered_at + _eval_bound(tr.timing[0], lenv)
                hi = tr.timing[1]
                if hi is not None:
                    hi = ist.entered_at + _eval_bound(hi, lenv)
                    if hi < now:
                        continue  # window already closed
                choice_list.append((tr, lo, hi))
            if not choice_list:
                feasible = False
                break
            options.append(choice_list)
        if not feasible:
            continue
        clo, chi = inter.timing
        conn_lo = enabling + _eval_bound(clo, genv)
        conn_hi = None if chi is None else enabling + _eval_bound(chi, genv)
        for combo in product(*options):
            lo = conn_lo
            hi = conn_hi
            for _, tlo, thi in combo:
                if tlo > lo:
                    lo = tlo
                if thi is not None and (hi is None or thi < hi):
                    hi = thi
            if lo < now:
                lo = now
            if hi is not None and hi < lo:
                continue
            candidates.append(Candidate(
                interaction=inter,
                choices=tuple(tr for tr, _, _ in combo),
                window=(lo, hi),
            ))

    if model.priorities and len(candidates) > 1:
        present = {c.name for c in candidates}
        removed: set[str] = set()
        for rule in model.priorities:
            if (rule.higher in present and rule.lower in present
                    and eval_expr(rule.condition, genv)):
                removed.add(rule.lower)
        if removed:
            candidates = [c for c in candidates if c.name not in removed]
    return candidates


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservationPoint:
    """Complete variable snapshot after the firing(s) at ``time``."""

    time: float
    values: dict
    fired: str


@dataclass(frozen=True)
class Trace:
    points: tuple
    horizon: float

    @property
    def variables(self) -> tuple:
        return tuple(sorted(self.points[0].values))

    @property
    def final_values(self) -> dict:
        return dict(self.points[-1].values)

    def value_series(self, name: str) -> list:
        return [(p.time, p.values[name]) for p in self.points]


class _Quiescent:
    __slots__ = ()

    def __repr__(self):
        return "QUIESCENT"


#: Returned by step() when no interaction can ever fire again.
QUIESCENT = _Quiescent()


def step(model: CompoundModel, state: dict, now: float, rng: RngStream):
    """Fire one interaction.  Returns (new_state, ObservationPoint) or
    QUIESCENT when nothing is enabled.

    Draw protocol (fixed, for reproducibility): one uniform per candidate in
    canonical order, one index draw on exact ties, one gate draw if the
    winner is gated, then outcome draws per participant in order.
    """
    candidates = enabled_interactions(model, state, now)
    if not candidates:
        return QUIESCENT

    times = []
    for cand in candidates:
        lo, hi = cand.window
        # An unbounded window has no uniform; such a candidate offers to fire
        # as early as possible.
        times.append(lo if hi is None else rng.uniform(lo, hi))
    best = min(times)
    tied = [i for i, t in enumerate(times) if t == best]
    idx = tied[0] if len(tied) == 1 else tied[rng.integers(len(tied))]
    winner = candidates[idx]
    t = times[idx]

    new_state = dict(state)
    copied: set[str] = set()

    def ensure(iid: str) -> InstanceState:
        if iid not in copied:
            new_state[iid] = new_state[iid].copy()
            copied.add(iid)
        return new_state[iid]

    if model.has_clocks:
        dt = t - now
        if dt > 0:
            for iid in new_state:
                if new_state[iid].clocks:
                    ist = ensure(iid)
                    for c in ist.clocks:
                        ist.clocks[c] += dt

    inter = winner.interaction
    success = True
    if inter.gate is not None:
        draw = sample(inter.gate, rng, _GlobalEnv(new_state))
        success = draw >= 0.5

    if success:
        genv = _GlobalEnv(new_state)
        for target, ex in inter.actions:
            value = eval_expr(ex, genv)
            inst, _, var = target.partition(".")
            ensure(inst).vars[var] = value
        for (inst_id, _), tr in zip(inter.parts, winner.choices):
            ist = ensure(inst_id)
            lenv = _LocalEnv(new_state, inst_id)
            for name, ex in tr.updates:
                ist.vars[name] = eval_expr(ex, lenv)
            if tr.outcome is not None:
                dist, target = tr.outcome
                ist.vars[target] = sample(dist, rng, lenv)
            for c in tr.resets:
                ist.clocks[c] = 0.0
            ist.state = tr.target
            ist.entered_at = t
        fired = inter.name
    else:
        # Gate failure: the occurrence is consumed (participants move, clocks
        # reset) but no data effect happens.
        for (inst_id, _), tr in zip(inter.parts, winner.choices):
            ist = ensure(inst_id)
            for c in tr.resets:
                ist.clocks[c] = 0.0
            ist.state = tr.target
            ist.entered_at = t
        fired = f"{inter.name}:failed"

    return new_state, ObservationPoint(time=t, values=_snapshot(model, new_state), fired=fired)


def simulate(model: CompoundModel, horizon: float, rng: RngStream, *,
             step_limit: int = DEFAULT_STEP_LIMIT) -> Trace:
    """Run from the initial state until the horizon, quiescence, or the step
    cap (which raises StepLimitExceededError).

    The trace starts with an "init" point at time 0; firings that share an
    instant are merged into a single point holding the final values, with
    labels joined by ";".  Values at the last point extend to the horizon.
    """
    state = initial_state(model)
    points: list[ObservationPoint] = [
        ObservationPoint(0.0, _snapshot(model, state), "init")
    ]
    now = 0.0
    steps = 0
    while True:
        steps += 1
        if steps > step_limit:
            raise StepLimitExceededError(step_limit, now)
        result = step(model, state, now, rng)
        if result is QUIESCENT:
            break
        state, point = result
        if point.time > horizon:
            break
        last = points[-1]
        if point.time == last.time:
            points[-1] = ObservationPoint(last.time, point.values,
                                          f"{last.fired};{point.fired}")
        else:
            points.append(point)
        now = point.time
    return Trace(points=tuple(points), horizon=float(horizon))


# ---------------------------------------------------------------------------
# Trace serialization
# ---------------------------------------------------------------------------

def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_trace_csv(trace: Trace, path: str) -> None:
    """Columns: time, fired, then every variable in sorted dotted order."""
    names = trace.variables
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "fired", *names])
        for p in trace.points:
            writer.writerow([repr(p.time), p.fired, *(_fmt_value(p.values[n]) for n in names)])


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_trace_csv(path: str, horizon: float | None = None) -> Trace:
    """Inverse of write_trace_csv.  Horizon defaults to the last point's time."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["time", "fired"]:
            raise ValueError(f"not a trace file: {path}")
        names = header[2:]
        points = []
        for row in reader:
            values = {n: _parse_value(v) for n, v in zip(names, row[2:])}
            points.append(ObservationPoint(float(row[0]), values, row[1]))
    if not points:
        raise ValueError(f"trace file {path} has no points")
    return Trace(points=tuple(points),
                 horizon=points[-1].time if horizon is None else float(horizon))
