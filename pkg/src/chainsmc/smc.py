"""Statistical verification over many independent simulations.

Two questions are answered about P(model satisfies formula):

* quantitative — estimate p to precision delta with risk alpha using the
  fixed sample size N = ceil(ln(2/alpha) / (2 delta^2));
* qualitative — decide p >= theta with a sequential probability ratio test
  over the indifference region (theta - epsilon, theta + epsilon).

Trace i always uses rng_stream(master_seed, i), so results are identical
whether traces run sequentially or in a process pool.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

from .errors import BadParameterError, InconclusiveTraceError
from .kernel import DEFAULT_STEP_LIMIT, CompoundModel, simulate
from .monitor import Formula, Truth, evaluate, required_horizon
from .stochastics import rng_stream


def sample_size(delta: float, alpha: float) -> int:
    """Number of traces for precision delta at risk alpha."""
    if not (0.0 < delta < 1.0):
        raise BadParameterError(f"delta {delta} outside (0, 1)")
    if not (0.0 < alpha < 1.0):
        raise BadParameterError(f"alpha {alpha} outside (0, 1)")
    return math.ceil(math.log(2.0 / alpha) / (2.0 * delta * delta))


# ---------------------------------------------------------------------------
# Trace execution
# ---------------------------------------------------------------------------

def _verdict_chunk(model: CompoundModel, formula: Formula, horizon: float,
                   master_seed: int, indices: range, step_limit: int) -> list:
    out = []
    for i in indices:
        trace = simulate(model, horizon, rng_stream(master_seed, i),
                         step_limit=step_limit)
        out.append((i, evaluate(formula, trace)))
    return out


def run_traces(model: CompoundModel, formula: Formula, horizon: float,
               master_seed: int, n: int, *, parallel: bool = False,
               max_workers: int | None = None,
               step_limit: int = DEFAULT_STEP_LIMIT) -> list:
    """Verdicts for traces 0..n-1, ordered by trace index."""
    if n < 1:
        raise BadParameterError(f"need at least one trace, got {n}")
    if not parallel:
        return [v for _, v in _verdict_chunk(model, formula, horizon,
                                             master_seed, range(n), step_limit)]
    verdicts: list = [None] * n
    workers = max_workers if max_workers is not None else (os.cpu_count() or 2)
    chunk = max(1, -(-n // (workers * 4)))
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        futures = [
            pool.submit(_verdict_chunk, model, formula, horizon,
                        master_seed, range(start, min(start + chunk, n)), step_limit)
            for start in range(0, n, chunk)
        ]
        for fut in futures:
            for i, verdict in fut.result():
                verdicts[i] = verdict
    return verdicts


# ---------------------------------------------------------------------------
# Quantitative question
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimationRequest:
    model: CompoundModel
    formula: Formula
    delta: float
    alpha: float
    master_seed: int
    horizon: float


@dataclass(frozen=True)
class EstimationResult:
    p_hat: float
    n_traces: int
    successes: int
    delta: float
    alpha: float
    master_seed: int
    inconclusive_count: int = 0

    def to_json_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "n_traces": self.n_traces,
            "successes": self.successes,
            "delta": self.delta,
            "alpha": self.alpha,
            "seed": self.master_seed,
        }


def estimate(request: EstimationRequest, *, parallel: bool = False,
             max_workers: int | None = None,
             step_limit: int = DEFAULT_STEP_LIMIT) -> EstimationResult:
    """Fixed-N probability estimation; deterministic given master_seed.

    Raises InconclusiveTraceError if any trace fails to decide the formula
    (prevented by the horizon precondition for well-formed requests).
    """
    needed = required_horizon(request.formula)
    if request.horizon < needed:
        raise BadParameterError(
            f"horizon {request.horizon} below required {needed}")
    n = sample_size(request.delta, request.alpha)
    verdicts = run_traces(request.model, request.formula, request.horizon,
                          request.master_seed, n, parallel=parallel,
                          max_workers=max_workers, step_limit=step_limit)
    successes = 0
    for i, v in enumerate(verdicts):
        if v.value is Truth.INCONCLUSIVE:
            raise InconclusiveTraceError(
                f"trace {i} undecided at horizon {request.horizon}")
        if v.value is Truth.TRUE:
            successes += 1
    return EstimationResult(
        p_hat=successes / n,
        n_traces=n,
        successes=successes,
        delta=request.delta,
        alpha=request.alpha,
        master_seed=request.master_seed,
    )


# ---------------------------------------------------------------------------
# Qualitative question
# ---------------------------------------------------------------------------

class Decision(Enum):
    GEQ_THETA = "GEQ_THETA"
    LT_THETA = "LT_THETA"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class HypothesisRequest:
    model: CompoundModel
    formula: Formula
    theta: float
    alpha: float
    master_seed: int
    horizon: float
    beta: float | None = None  # defaults to alpha
    epsilon: float = 0.01
    max_samples: int | None = None  # defaults to 10 * sample_size(epsilon, alpha)


@dataclass(frozen=True)
class HypothesisResult:
    decision: Decision
    samples_used: int
    log_ratio: float

    def to_json_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "samples_used": self.samples_used,
            "log_ratio": self.log_ratio,
        }


def hypothesis_test(request: HypothesisRequest, *,
                    step_limit: int = DEFAULT_STEP_LIMIT) -> HypothesisResult:
    """Wald SPRT of H1: p >= theta+epsilon against H0: p <= theta-epsilon.

    Traces are consumed one at a time (stream index = trace number) until a
    boundary is crossed or max_samples is reached (UNDECIDED).
    """
    theta, eps = request.theta, request.epsilon
    alpha = request.alpha
    beta = request.beta if request.beta is not None else alpha
    if not (0.0 < theta < 1.0):
        raise BadParameterError(f"theta {theta} outside (0, 1)")
    if eps <= 0.0 or theta - eps <= 0.0 or theta + eps >= 1.0:
        raise BadParameterError(
            f"indifference region (theta={theta}, epsilon={eps}) outside (0, 1)")
    if not (0.0 < alpha < 1.0) or not (0.0 < beta < 1.0):
        raise BadParameterError("alpha and beta must lie in (0, 1)")
    needed = required_horizon(request.formula)
    if request.horizon < needed:
        raise BadParameterError(
            f"horizon {request.horizon} below required {needed}")
    max_samples = request.max_samples
    if max_samples is None:
        max_samples = 10 * sample_size(eps, alpha)
    if max_samples < 1:
        raise BadParameterError(f"max_samples {max_samples} below 1")

    p0, p1 = theta - eps, theta + eps
    upper = math.log((1.0 - beta) / alpha)   # accept H1 at or above
    lower = math.log(beta / (1.0 - alpha))   # accept H0 at or below
    step_success = math.log(p1 / p0)
    step_failure = math.log((1.0 - p1) / (1.0 - p0))

    log_ratio = 0.0
    samples = 0
    while samples < max_samples:
        rng = rng_stream(request.master_seed, samples)
        trace = simulate(request.model, request.horizon, rng, step_limit=step_limit)
        verdict = evaluate(request.formula, trace)
        if verdict.value is Truth.INCONCLUSIVE:
            raise InconclusiveTraceError(
                f"trace {samples} undecided at horizon {request.horizon}")
        samples += 1
        log_ratio += step_success if verdict.value is Truth.TRUE else step_failure
        if log_ratio >= upper:
            return HypothesisResult(Decision.GEQ_THETA, samples, log_ratio)
        if log_ratio <= lower:
            return HypothesisResult(Decision.LT_THETA, samples, log_ratio)
    return HypothesisResult(Decision.UNDECIDED, samples, log_ratio)
