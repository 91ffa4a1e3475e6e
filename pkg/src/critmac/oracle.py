"""Brute-force Monte Carlo oracle for the closed-form metrics.

This is the validation counterpart of the analytical formulas: it estimates
T_c, C_norm and D_crit by direct simulation (baseline protocol, single
critical user), vectorized across rounds so that 10^6-round runs finish in
seconds.  Estimators are deliberately free of windowing bias:

* T_c simulates whole contention periods on the transmission-count chain,
  starting from the idle slot and counting slots until the first success;
* C_norm simulates whole renewal cycles (a success run is one geometric
  draw of the run length, which is exactly the per-slot stopping process)
  and forms total successes / total slots with a delta-method SE;
* D_crit simulates the full N-user slot process through a warm-up normal
  phase long enough for the slot-state distribution to reach stationarity,
  then injects a critical event at a uniformly chosen user and counts its
  collisions until the first success.

Randomness comes from a single counter-based Philox stream (per call), with
a fixed batch layout, so results are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParams
from .protocol import ProtocolParams

_BATCH = 1 << 17
_WARMUP_SLOTS = 300

_IDLE, _BUSY, _SUCCESS, _FAILURE = 0, 1, 2, 3


@dataclass(frozen=True)
class OracleEstimate:
    t_c: float
    t_c_se: float
    c_norm: float
    c_norm_se: float
    d_crit: float
    d_crit_se: float
    rounds: int


def _contention_lengths(params: ProtocolParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """Simulate `size` contention periods on the state chain; returns lengths."""
    n, q, r = params.n_users, params.q, params.r
    state = np.zeros(size, dtype=np.int64)
    length = np.ones(size, dtype=np.int64)  # the initial idle slot counts
    idx = np.arange(size)
    while idx.size:
        s = state[idx]
        trials = np.where(s == 0, n, s)
        p = np.where(s == 0, q, r)
        nxt = rng.binomial(trials, p)
        state[idx] = nxt
        keep = nxt != 1
        length[idx[keep]] += 1
        idx = idx[keep]
    return length


def _obs_table(params: ProtocolParams) -> np.ndarray:
    return np.array(
        [params.q, 0.0, 1.0 - params.theta, params.r], dtype=np.float32
    )


def _step_observations(tx: np.ndarray) -> np.ndarray:
    k = tx.sum(axis=1, keepdims=True)
    return np.where(
        tx,
        np.where(k == 1, _SUCCESS, _FAILURE),
        np.where(k == 0, _IDLE, _BUSY),
    ).astype(np.int8)


def _critical_collision_counts(
    params: ProtocolParams, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Warm up the N-user slot process, inject one critical user, count its failures."""
    n = params.n_users
    table = _obs_table(params)
    obs = np.zeros((size, n), dtype=np.int8)
    for _ in range(_WARMUP_SLOTS):
        tx = rng.random((size, n), dtype=np.float32) < table[obs]
        obs = _step_observations(tx)
    crit = rng.integers(0, n, size)
    fails = np.zeros(size, dtype=np.int64)
    idx = np.arange(size)
    while idx.size:
        sub = obs[idx]
        p = table[sub]
        p[np.arange(idx.size), crit[idx]] = 1.0
        tx = rng.random(sub.shape, dtype=np.float32) < p
        k = tx.sum(axis=1)
        succ = k == 1  # the critical user always transmits, so k==1 is its success
        fails[idx[~succ]] += 1
        obs[idx] = _step_observations(tx)
        idx = idx[~succ]
    return fails


def estimate_metrics_oracle(params: ProtocolParams, rounds: int, seed: int) -> OracleEstimate:
    """Estimate (T_c, C_norm, D_crit) with standard errors from `rounds` samples each."""
    if params.n_users < 2:
        raise BadParams("the oracle requires n_users >= 2")
    if not 0.0 < params.q < 1.0 or not 0.0 <= params.r < 1.0:
        raise BadParams("the oracle requires q in (0, 1) and r in [0, 1)")
    if rounds < 2:
        raise BadParams("rounds must be >= 2")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 0))))

    c_sum = c_sumsq = 0.0
    s_sum = s_sumsq = 0.0
    d_sum = d_sumsq = 0.0
    left = rounds
    while left > 0:
        b = min(_BATCH, left)
        left -= b
        conts = _contention_lengths(params, b, rng).astype(np.float64)
        runs = rng.geometric(params.theta, b).astype(np.float64)
        fails = _critical_collision_counts(params, b, rng).astype(np.float64)
        c_sum += conts.sum()
        c_sumsq += (conts**2).sum()
        s_sum += runs.sum()
        s_sumsq += (runs**2).sum()
        d_sum += fails.sum()
        d_sumsq += (fails**2).sum()

    m = float(rounds)
    t_c = c_sum / m
    var_c = c_sumsq / m - t_c**2
    t_c_se = math.sqrt(var_c / m)
    s_mean = s_sum / m
    var_s = s_sumsq / m - s_mean**2
    c_norm = s_sum / (s_sum + c_sum)
    # delta method on f(s, c) = s / (s + c) with independent cycle halves
    denom = (s_mean + t_c) ** 4
    c_norm_se = math.sqrt((t_c**2 * var_s / m + s_mean**2 * var_c / m) / denom)
    d_crit = d_sum / m
    var_d = d_sumsq / m - d_crit**2
    d_crit_se = math.sqrt(var_d / m)
    return OracleEstimate(
        t_c=t_c,
        t_c_se=t_c_se,
        c_norm=c_norm,
        c_norm_se=c_norm_se,
        d_crit=d_crit,
        d_crit_se=d_crit_se,
        rounds=rounds,
    )
