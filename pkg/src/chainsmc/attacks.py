"""Executable attack scenarios as compound models, plus their closed-form
probability functions.

Three models are bundled, selectable by name in the CLI:

* ``dns`` — cache poisoning by transaction-id collision.  An adversary
  floods a resolver with spoofed replies (one request per interval); each
  request's success is gated by the running collision probability.  A user
  queries the cache once within a window and transfers funds to whichever
  network address it was served.  Time unit: milliseconds.
* ``mempool`` — double spend under congestion.  Two conflicting payments go
  to two users; each user validates against the committed history, releases
  the asset immediately, and forwards to its miner, whose confirmation delay
  is drawn from a historical mining-time distribution.  The second payment
  is sent in a window [t', t' + slack].  Time unit: seconds.
* ``consensus`` — double spend against propagation lag.  Same race, but the
  delay is block propagation between nodes and the second payment is sent at
  exactly t'.  Time unit: seconds.

Handoffs that are conceptually immediate use a tiny window [0, EPS] so that
simultaneous events stay strictly ordered without distorting the second- or
millisecond-scale races being measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BadParameterError
from .expr import Var, lit, var
from .kernel import (
    AtomicComponent,
    CompoundModel,
    Connector,
    TransitionDef,
    build_compound,
)
from .monitor import Formula, parse_formula
from .stochastics import Distribution, StateBernoulli

#: Width of an "immediate" step, in the model's own time unit.
EPS_MS = 1e-3
EPS_S = 1e-6


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def collision_probability(t: int, n: int) -> float:
    """Probability that n uniformly chosen ids from a set of size t collide:
    1 - (1 - 1/t)^(n(n-1)/2), evaluated stably for large exponents."""
    if t < 1:
        raise BadParameterError(f"master set size {t} below 1")
    if n < 0:
        raise BadParameterError(f"request count {n} negative")
    exponent = n * (n - 1) // 2
    if exponent == 0:
        return 0.0
    if t == 1:
        return 1.0
    return -math.expm1(exponent * math.log1p(-1.0 / t))


def negligible_bound(R: int, q_s: int, hash_bits: int) -> float:
    """Mitigation-bypass bound min(1, R * q_s * 2^-hash_bits) for an
    n-bit-hash defense over a domain set of size R after q_s queries."""
    if R < 1:
        raise BadParameterError(f"domain set size {R} below 1")
    if q_s < 0:
        raise BadParameterError(f"query count {q_s} negative")
    if hash_bits < 1:
        raise BadParameterError(f"hash length {hash_bits} below 1")
    return min(1.0, R * q_s * math.ldexp(1.0, -hash_bits))


# ---------------------------------------------------------------------------
# Parameter blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DnsMitigation:
    hash_bits: int
    domain_set: int = 65535

    def __post_init__(self):
        if self.hash_bits < 1:
            raise BadParameterError(f"hash_bits {self.hash_bits} below 1")
        if self.domain_set < 1:
            raise BadParameterError(f"domain_set {self.domain_set} below 1")


@dataclass(frozen=True)
class DnsParams:
    """``request_interval`` is the adversary's pacing in ms (one request per
    interval); the attack window and the default property bound are
    [0, request_window]."""

    master_set_size: int = 65535
    request_window: float = 1000.0
    max_requests: int = 1000
    request_interval: float = 1.0
    mitigation: DnsMitigation | None = None

    def __post_init__(self):
        if self.master_set_size < 1:
            raise BadParameterError(f"master_set_size {self.master_set_size} below 1")
        if self.request_window <= 0:
            raise BadParameterError(f"request_window {self.request_window} not positive")
        if self.max_requests < 1:
            raise BadParameterError(f"max_requests {self.max_requests} below 1")
        if self.request_interval <= 0:
            raise BadParameterError(f"request_interval {self.request_interval} not positive")


@dataclass(frozen=True)
class DoubleSpendParams:
    """``t_prime`` is the lower bound (seconds) on the second, conflicting
    send; the mempool model samples the send uniformly in
    [t_prime, t_prime + send_slack], the consensus model sends exactly at
    t_prime."""

    t_prime: float
    send_slack: float = 60.0
    horizon: float = 1e12

    def __post_init__(self):
        if self.t_prime < 0:
            raise BadParameterError(f"t_prime {self.t_prime} negative")
        if self.send_slack < 0:
            raise BadParameterError(f"send_slack {self.send_slack} negative")
        if self.horizon <= 0:
            raise BadParameterError(f"horizon {self.horizon} not positive")


@dataclass(frozen=True)
class AttackModelBundle:
    """A ready-to-run model with its default property and documentation of
    the observable variables."""

    model: CompoundModel
    default_property: Formula
    property_text: str
    default_horizon: float
    variables: dict
    time_unit: str


# ---------------------------------------------------------------------------
# DNS cache poisoning
# ---------------------------------------------------------------------------

def build_dns_model(params: DnsParams = DnsParams()) -> AttackModelBundle:
    """Five instances: adversary, cache, user, blockchain, spoofed.

    The adversary's request loop keeps the cumulative collision probability
    as state: after k requests the no-collision factor is
    (1 - 1/t)^(k(k-1)/2), maintained incrementally as a pair of running
    products so the gate expression needs only * and -.  When a request hits
    (collision), the poisoning daemon rewrites the cache's served address;
    under mitigation the daemon is additionally gated by the negligible
    bound at the adversary's running query count.
    """
    t = params.master_set_size
    w = params.request_window
    decay = 1.0 - 1.0 / t  # per-request survival factor ratio

    adversary = AtomicComponent(
        name="DnsAdversary",
        states=("probing", "finished"),
        initial="probing",
        variables=(
            ("requests", "int", 0),
            ("hit", "real", 0.0),
            ("surv", "real", 1.0),  # (1-1/t)^(k(k-1)/2)
            ("pw", "real", 1.0),    # (1-1/t)^k
        ),
        ports=("daemon",),
        transitions=(
            TransitionDef(
                "probing", "probing",
                guard=(var("requests") < params.max_requests) & var("hit").eq(0),
                timing=(params.request_interval, params.request_interval),
                updates=(
                    ("surv", var("surv") * var("pw")),
                    ("pw", var("pw") * decay),
                    ("requests", var("requests") + 1),
                ),
                outcome=(StateBernoulli(lit(1.0) - var("surv")), "hit"),
                label="request",
            ),
            TransitionDef(
                "probing", "finished", port="daemon",
                guard=var("hit").eq(1),
                timing=(0.0, EPS_MS),
                label="daemon",
            ),
        ),
    )

    cache = AtomicComponent(
        name="Cache",
        states=("serving",),
        initial="serving",
        variables=(("served", "real", 0.0),),  # 0 = genuine, 1 = spoofed
        ports=("reply", "daemon"),
        transitions=(
            TransitionDef("serving", "serving", port="reply", timing=(0.0, None),
                          label="reply"),
            TransitionDef("serving", "serving", port="daemon", timing=(0.0, None),
                          label="rewrite"),
        ),
    )

    user = AtomicComponent(
        name="User",
        states=("idle", "resolved", "connected", "done"),
        initial="idle",
        variables=(("addr", "real", 0.0), ("funds", "int", 1)),
        ports=("query", "connect", "transfer"),
        transitions=(
            TransitionDef("idle", "resolved", port="query", timing=(0.0, w),
                          label="query"),
            TransitionDef("resolved", "connected", port="connect",
                          timing=(0.0, EPS_MS), label="connect"),
            TransitionDef("connected", "done", port="transfer",
                          timing=(0.0, EPS_MS), label="transfer"),
        ),
    )

    def network(name: str) -> AtomicComponent:
        return AtomicComponent(
            name=name,
            states=("listening", "session", "paid"),
            initial="listening",
            variables=(("amount", "real", 0.0),),
            ports=("connect", "transfer"),
            transitions=(
                TransitionDef("listening", "session", port="connect",
                              timing=(0.0, None), label="connect"),
                TransitionDef("session", "paid", port="transfer",
                              timing=(0.0, None), label="transfer"),
            ),
        )

    gate = None
    if params.mitigation is not None:
        coeff = params.mitigation.domain_set * math.ldexp(1.0, -params.mitigation.hash_bits)
        gate = StateBernoulli(lit(coeff) * var("adversary.requests"))

    connectors = (
        Connector(
            name="resolve",
            participants=(("user", "query"), ("cache", "reply")),
            actions=(("user.addr", var("cache.served")),),
        ),
        Connector(
            name="poison",
            participants=(("adversary", "daemon"), ("cache", "daemon")),
            actions=(("cache.served", lit(1.0)),),
            gate=gate,
        ),
        Connector(
            name="connect_genuine",
            participants=(("user", "connect"), ("blockchain", "connect")),
            guard=var("user.addr").eq(0),
        ),
        Connector(
            name="connect_spoofed",
            participants=(("user", "connect"), ("spoofed", "connect")),
            guard=var("user.addr").eq(1),
        ),
        Connector(
            name="pay_genuine",
            participants=(("user", "transfer"), ("blockchain", "transfer")),
            guard=var("user.addr").eq(0),
            actions=(("blockchain.amount", var("blockchain.amount") + var("user.funds")),),
        ),
        Connector(
            name="pay_spoofed",
            participants=(("user", "transfer"), ("spoofed", "transfer")),
            guard=var("user.addr").eq(1),
            actions=(("spoofed.amount", var("spoofed.amount") + var("user.funds")),),
        ),
    )

    model = build_compound(
        instances=(
            ("adversary", adversary),
            ("cache", cache),
            ("user", user),
            ("blockchain", network("GenuineNetwork")),
            ("spoofed", network("SpoofedNetwork")),
        ),
        connectors=connectors,
        time_unit_label="milliseconds",
    )
    prop_text = f"F[0,{w:g}](spoofed.amount > 0)"
    return AttackModelBundle(
        model=model,
        default_property=parse_formula(prop_text),
        property_text=prop_text,
        default_horizon=w,
        variables={
            "adversary.requests": "spoofed replies sent so far",
            "adversary.hit": "1 once a transaction-id collision happened",
            "adversary.surv": "running no-collision probability",
            "adversary.pw": "running per-request survival factor",
            "cache.served": "address the cache serves (0 genuine, 1 spoofed)",
            "user.addr": "address the user resolved",
            "user.funds": "amount the user transfers",
            "blockchain.amount": "funds received by the genuine network",
            "spoofed.amount": "funds received by the adversary's network",
        },
        time_unit="milliseconds",
    )


# ---------------------------------------------------------------------------
# Double-spend models
# ---------------------------------------------------------------------------

def _release_user(name: str, committed_var: str) -> AtomicComponent:
    """A recipient that validates an incoming payment against the committed
    history, verifies it, releases the asset and forwards it on.  The
    payment is refused when the conflicting transaction is already
    committed."""
    return AtomicComponent(
        name=name,
        states=("waiting", "received", "validated", "verified", "released", "refused"),
        initial="waiting",
        ports=("recv", "fwd"),
        transitions=(
            TransitionDef("waiting", "received", port="recv", timing=(0.0, None),
                          label="recv"),
            TransitionDef("received", "validated",
                          guard=Var(committed_var).eq(0),
                          timing=(0.0, EPS_S), label="validate"),
            TransitionDef("received", "refused",
                          guard=Var(committed_var).eq(1),
                          timing=(0.0, EPS_S), label="reject"),
            TransitionDef("validated", "verified", timing=(0.0, EPS_S),
                          label="verify"),
            TransitionDef("verified", "released", port="fwd", timing=(0.0, EPS_S),
                          label="forward"),
        ),
    )


def _delay_relay(name: str, delay_dist: Distribution) -> AtomicComponent:
    """Accepts a transaction, holds it for a drawn delay, then publishes."""
    return AtomicComponent(
        name=name,
        states=("free", "working", "published"),
        initial="free",
        variables=(("delay", "real", 0.0),),
        ports=("recv", "publish"),
        transitions=(
            TransitionDef("free", "working", port="recv", timing=(0.0, None),
                          outcome=(delay_dist, "delay"), label="queue"),
            TransitionDef("working", "published", port="publish",
                          timing=(var("delay"), var("delay")), label="publish"),
        ),
    )


def _double_spend_model(t_prime: float, send_hi: float, horizon: float,
                        delay_dist: Distribution, relay_a: str, relay_b: str,
                        ledger_id: str, relay_kind: str,
                        time_unit: str) -> AttackModelBundle:
    adversary = AtomicComponent(
        name="SpendingAdversary",
        states=("start", "sent_one", "sent_both"),
        initial="start",
        variables=(("asset", "int", 0),),
        ports=("send1", "send2"),
        transitions=(
            TransitionDef("start", "sent_one", port="send1", timing=(0.0, EPS_S),
                          label="send_tx1"),
            TransitionDef("sent_one", "sent_both", port="send2",
                          timing=(t_prime, send_hi), label="send_tx2"),
        ),
    )

    ledger = AtomicComponent(
        name="Ledger",
        states=("open",),
        initial="open",
        variables=(("committed1", "int", 0), ("committed2", "int", 0)),
        ports=("accept1", "accept2"),
        transitions=(
            TransitionDef("open", "open", port="accept1", timing=(0.0, None),
                          label="accept_tx1"),
            TransitionDef("open", "open", port="accept2", timing=(0.0, None),
                          label="accept_tx2"),
        ),
    )

    instances = (
        ("adversary", adversary),
        ("user_a", _release_user("UserA", f"{ledger_id}.committed2")),
        ("user_b", _release_user("UserB", f"{ledger_id}.committed1")),
        (relay_a, _delay_relay("RelayA", delay_dist)),
        (relay_b, _delay_relay("RelayB", delay_dist)),
        (ledger_id, ledger),
    )

    asset_plus_one = var("adversary.asset") + 1
    connectors = (
        Connector("send_tx1", (("adversary", "send1"), ("user_a", "recv"))),
        Connector("send_tx2", (("adversary", "send2"), ("user_b", "recv"))),
        Connector("forward_tx1", (("user_a", "fwd"), (relay_a, "recv")),
                  actions=(("adversary.asset", asset_plus_one),)),
        Connector("forward_tx2", (("user_b", "fwd"), (relay_b, "recv")),
                  actions=(("adversary.asset", asset_plus_one),)),
        Connector("commit_tx1", ((relay_a, "publish"), (ledger_id, "accept1")),
                  actions=((f"{ledger_id}.committed1",
                            lit(1) - Var(f"{ledger_id}.committed2")),)),
        Connector("commit_tx2", ((relay_b, "publish"), (ledger_id, "accept2")),
                  actions=((f"{ledger_id}.committed2",
                            lit(1) - Var(f"{ledger_id}.committed1")),)),
    )

    model = build_compound(instances=instances, connectors=connectors,
                           time_unit_label=time_unit)
    prop_text = f"F[0,{horizon:g}](adversary.asset == 2)"
    variables = {
        "adversary.asset": "assets released to the adversary (2 = double spend)",
        f"{ledger_id}.committed1": "first transaction committed",
        f"{ledger_id}.committed2": "conflicting transaction committed",
        f"{relay_a}.delay": f"drawn {relay_kind} delay for the first transaction",
        f"{relay_b}.delay": f"drawn {relay_kind} delay for the conflicting transaction",
    }
    return AttackModelBundle(
        model=model,
        default_property=parse_formula(prop_text),
        property_text=prop_text,
        default_horizon=horizon,
        variables=variables,
        time_unit=time_unit,
    )


def build_mempool_model(params: DoubleSpendParams,
                        mining_time: Distribution) -> AttackModelBundle:
    """Six instances: adversary, user_a, user_b, miner_c, miner_d, pow.
    Congestion enters through ``mining_time``, the confirmation-delay
    distribution (typically Empirical over historical data).  The second
    send lands uniformly in [t_prime, t_prime + send_slack]."""
    return _double_spend_model(
        t_prime=params.t_prime,
        send_hi=params.t_prime + params.send_slack,
        horizon=params.horizon,
        delay_dist=mining_time,
        relay_a="miner_c", relay_b="miner_d", ledger_id="pow",
        relay_kind="mining", time_unit="seconds",
    )


def build_consensus_model(params: DoubleSpendParams,
                          propagation_delay: Distribution) -> AttackModelBundle:
    """Six instances: adversary, user_a, user_b, node_a, node_b, ledger.
    The race is against block propagation; the second send happens at
    exactly t_prime (send_slack is ignored)."""
    return _double_spend_model(
        t_prime=params.t_prime,
        send_hi=params.t_prime,
        horizon=params.horizon,
        delay_dist=propagation_delay,
        relay_a="node_a", relay_b="node_b", ledger_id="ledger",
        relay_kind="propagation", time_unit="seconds",
    )
