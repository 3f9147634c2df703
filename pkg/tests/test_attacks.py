import math

import pytest

from chainsmc import (
    BadParameterError,
    Dataset,
    DnsMitigation,
    DnsParams,
    DoubleSpendParams,
    Empirical,
    EstimationRequest,
    Truth,
    build_consensus_model,
    build_dns_model,
    build_mempool_model,
    collision_probability,
    estimate,
    evaluate,
    negligible_bound,
    rng_stream,
    simulate,
)


def _point_dataset(value):
    return Empirical(Dataset.from_values("d", [float(value)], unit="seconds"))


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def test_collision_probability_reference_values():
    assert collision_probability(65535, 150) == pytest.approx(0.15677450925, rel=1e-9)
    assert collision_probability(65535, 300) == pytest.approx(0.49559328065, rel=1e-9)
    assert collision_probability(65535, 700) == pytest.approx(0.97608257938, rel=1e-9)
    assert collision_probability(65535, 1000) == pytest.approx(0.99951040870, rel=1e-9)


def test_collision_probability_edges():
    assert collision_probability(65535, 0) == 0.0
    assert collision_probability(65535, 1) == 0.0  # no pair yet
    assert collision_probability(1, 5) == 1.0
    for n in range(0, 2000, 13):
        a = collision_probability(65535, n)
        b = collision_probability(65535, n + 1)
        assert 0.0 <= a <= b <= 1.0


def test_collision_probability_validation():
    with pytest.raises(BadParameterError):
        collision_probability(0, 5)
    with pytest.raises(BadParameterError):
        collision_probability(65535, -1)


def test_negligible_bound():
    assert negligible_bound(1000, 65535, 160) == pytest.approx(4.484086663e-41,
                                                               rel=1e-9)
    assert negligible_bound(1000, 65535, 256) == pytest.approx(5.659713063e-70,
                                                               rel=1e-9)
    assert negligible_bound(10**30, 10**30, 16) == 1.0  # capped
    with pytest.raises(BadParameterError):
        negligible_bound(-1, 1, 160)


# ---------------------------------------------------------------------------
# Parameter validation
# ---------------------------------------------------------------------------

def test_dns_params_validation():
    with pytest.raises(BadParameterError):
        DnsParams(master_set_size=0)
    with pytest.raises(BadParameterError):
        DnsParams(request_window=0.0)
    with pytest.raises(BadParameterError):
        DnsParams(max_requests=0)
    with pytest.raises(BadParameterError):
        DnsMitigation(hash_bits=0)


def test_double_spend_params_validation():
    with pytest.raises(BadParameterError):
        DoubleSpendParams(t_prime=-1.0)
    with pytest.raises(BadParameterError):
        DoubleSpendParams(t_prime=1.0, send_slack=-1.0)
    with pytest.raises(BadParameterError):
        DoubleSpendParams(t_prime=1.0, horizon=0.0)


# ---------------------------------------------------------------------------
# DNS model
# ---------------------------------------------------------------------------

def test_dns_bundle_shape():
    b = build_dns_model(DnsParams())
    assert b.model.instance_ids == ("adversary", "cache", "user",
                                    "blockchain", "spoofed")
    assert b.time_unit == "milliseconds"
    assert b.default_horizon == 1000.0
    assert b.property_text == "F[0,1000](spoofed.amount > 0)"
    assert b.default_property == __import__("chainsmc").parse_formula(b.property_text)


def test_dns_gate_matches_closed_form():
    # the incremental product the adversary maintains must equal the
    # closed-form collision probability while the request window is full
    b = build_dns_model(DnsParams())
    trace = simulate(b.model, b.default_horizon, rng_stream(2024, 3))
    for p in trace.points:
        k = int(p.values["adversary.requests"])
        if p.values["adversary.hit"]:
            break
        want = collision_probability(65535, k)
        assert 1.0 - p.values["adversary.surv"] == pytest.approx(want, abs=1e-12)


def test_dns_poisoning_redirects_payment():
    b = build_dns_model(DnsParams())
    # find a seeded trace where poisoning happened, then check the flow
    for idx in range(20):
        trace = simulate(b.model, b.default_horizon, rng_stream(2024, idx))
        if trace.final_values["spoofed.amount"] > 0:
            assert trace.final_values["cache.served"] == 1.0
            assert trace.final_values["blockchain.amount"] == 0.0
            assert evaluate(b.default_property, trace).value is Truth.TRUE
            break
    else:
        pytest.fail("no poisoned trace among 20 seeds")


def test_dns_unpoisoned_pays_genuine_chain():
    b = build_dns_model(DnsParams(max_requests=1))  # adversary can barely try
    trace = simulate(b.model, b.default_horizon, rng_stream(7, 0))
    assert trace.final_values["spoofed.amount"] == 0.0
    assert trace.final_values["blockchain.amount"] == 1.0
    assert evaluate(b.default_property, trace).value is Truth.FALSE


def test_dns_short_window_lowers_success():
    lo = estimate(EstimationRequest(
        model=build_dns_model(DnsParams(request_window=200.0)).model,
        formula=build_dns_model(DnsParams(request_window=200.0)).default_property,
        delta=0.1, alpha=0.1, master_seed=2024, horizon=200.0))
    hi = estimate(EstimationRequest(
        model=build_dns_model(DnsParams(request_window=1000.0)).model,
        formula=build_dns_model(DnsParams(request_window=1000.0)).default_property,
        delta=0.1, alpha=0.1, master_seed=2024, horizon=1000.0))
    assert lo.p_hat < hi.p_hat
    assert hi.p_hat >= 0.9


def test_dns_mitigation_blocks_poisoning():
    b = build_dns_model(DnsParams(mitigation=DnsMitigation(hash_bits=160)))
    names = {i.name for i in b.model.interactions}
    assert "poison" in names
    r = estimate(EstimationRequest(model=b.model, formula=b.default_property,
                                   delta=0.1, alpha=0.1, master_seed=2024,
                                   horizon=b.default_horizon))
    assert r.successes == 0


# ---------------------------------------------------------------------------
# Double-spend models
# ---------------------------------------------------------------------------

def test_mempool_bundle_shape():
    b = build_mempool_model(DoubleSpendParams(t_prime=500.0), _point_dataset(600.0))
    assert b.model.instance_ids == ("adversary", "user_a", "user_b",
                                    "miner_c", "miner_d", "pow")
    assert b.time_unit == "seconds"
    assert b.property_text == "F[0,1e+12](adversary.asset == 2)"


def test_consensus_bundle_shape():
    b = build_consensus_model(DoubleSpendParams(t_prime=9.0), _point_dataset(10.0))
    assert b.model.instance_ids == ("adversary", "user_a", "user_b",
                                    "node_a", "node_b", "ledger")


def _success_rate(build, t_prime, delay, seed=5, horizon=1e6):
    b = build(DoubleSpendParams(t_prime=t_prime, horizon=horizon),
              _point_dataset(delay))
    r = estimate(EstimationRequest(model=b.model, formula=b.default_property,
                                   delta=0.1, alpha=0.1, master_seed=seed,
                                   horizon=b.default_horizon))
    return r.p_hat


def test_mempool_step_function_around_mining_time():
    # second send races the first tx's mining delay of exactly 600
    assert _success_rate(build_mempool_model, 500.0, 600.0) == 1.0
    assert _success_rate(build_mempool_model, 700.0, 600.0) == 0.0


def test_consensus_step_function_around_propagation_delay():
    assert _success_rate(build_consensus_model, 9.0, 10.0) == 1.0
    assert _success_rate(build_consensus_model, 11.0, 10.0) == 0.0


def test_double_spend_success_is_exactly_two_assets():
    b = build_mempool_model(DoubleSpendParams(t_prime=0.0, send_slack=0.0,
                                              horizon=1e6),
                            _point_dataset(500.0))
    trace = simulate(b.model, b.default_horizon, rng_stream(5, 0))
    assert trace.final_values["adversary.asset"] == 2.0
    ledger_total = (trace.final_values["pow.committed1"]
                    + trace.final_values["pow.committed2"])
    assert ledger_total == 1.0  # only one tx ever commits


def test_double_spend_failure_keeps_single_asset():
    b = build_consensus_model(DoubleSpendParams(t_prime=11.0, horizon=1e6),
                              _point_dataset(10.0))
    trace = simulate(b.model, b.default_horizon, rng_stream(5, 0))
    assert trace.final_values["adversary.asset"] == 1.0
    assert evaluate(b.default_property, trace).value is Truth.FALSE


def test_mempool_nontrivial_dataset_tracks_survival():
    # two-point mining-time dataset: P(T > 300) = 0.5 exactly
    ds = Empirical(Dataset.from_values("m", [200.0, 400.0], unit="seconds"))
    b = build_mempool_model(DoubleSpendParams(t_prime=300.0, horizon=1e6), ds)
    r = estimate(EstimationRequest(model=b.model, formula=b.default_property,
                                   delta=0.1, alpha=0.1, master_seed=12,
                                   horizon=b.default_horizon))
    assert abs(r.p_hat - 0.5) <= 0.1
