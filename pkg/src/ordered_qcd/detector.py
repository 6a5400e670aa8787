"""Centralized CUSUM detection over the clique statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import accumulate

import numpy as np

from .model import CoefficientSet, GaussianScenario, clique_statistics_batch, sample_observation

STREAM_CHUNK = 256


@dataclass(frozen=True)
class CusumState:
    W: float = 0.0
    n: int = 0


def cusum_update(state: CusumState, slot_sum: float) -> CusumState:
    return CusumState(max(0.0, state.W + slot_sum), state.n + 1)


def cusum_path(slot_sums) -> np.ndarray:
    """W_1..W_n from the recursion, starting at W_0 = 0."""
    return np.fromiter(
        accumulate(map(float, slot_sums), lambda w, s: max(0.0, w + s), initial=0.0),
        dtype=float,
    )[1:]


def glr_statistic(slot_llrs) -> float:
    """max(0, max over n' of sum_{i=n'}^{n} llr_i), via suffix sums."""
    llrs = np.asarray(slot_llrs, dtype=float)
    if llrs.size == 0:
        raise ValueError("need at least one slot")
    return max(0.0, float(np.cumsum(llrs[::-1]).max()))


@dataclass(frozen=True)
class DetectionOutcome:
    declared: bool
    stop_slot: int
    threshold: float

    @property
    def censored(self) -> bool:
        return not self.declared

    def delay(self, tau) -> float | None:
        """n' - tau for a detection at or after the change, else None."""
        if not self.declared or self.stop_slot < tau:
            return None
        return self.stop_slot - tau


@dataclass(frozen=True, eq=False)
class CentralizedTrace:
    W: np.ndarray
    slot_sums: np.ndarray
    all_negative: np.ndarray  # every L_k < 0 in the slot
    K: int

    @property
    def transmissions(self) -> np.ndarray:
        return np.full(len(self.W), self.K, dtype=int)


def slot_stream(scenario: GaussianScenario, coeffs: CoefficientSet, tau, horizon: int,
                rng: np.random.Generator, chunk: int = STREAM_CHUNK):
    """Yield (N, K) blocks of clique statistics for slots 1..horizon in order.

    Slots n < tau are drawn pre-change, n >= tau post-change. The draw
    sequence depends only on (rng, tau, chunk), so two engines fed from equal
    seeds see identical statistics.
    """
    n = 1
    while n <= horizon:
        stop = min(n + chunk, horizon + 1)
        split = min(max(tau, n), stop) if not math.isinf(tau) else stop
        parts = []
        if split > n:
            parts.append(sample_observation(scenario, "pre", rng, size=split - n))
        if stop > split:
            parts.append(sample_observation(scenario, "post", rng, size=stop - split))
        yield clique_statistics_batch(scenario, coeffs, np.vstack(parts))
        n = stop


def run_centralized(scenario, coeffs, b: float, tau, horizon: int, rng):
    """Every clique transmits every slot; stop at the first W_n >= b.

    Returns the outcome and the trace of W up to the stopping slot. A run
    that reaches ``horizon`` without an alarm is censored at ``horizon``.
    """
    if not b > 0:
        raise ValueError("threshold b must be positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    state = CusumState()
    W, sums, neg = [], [], []
    for block in slot_stream(scenario, coeffs, tau, horizon, rng):
        block_sums = block.sum(axis=1)
        block_neg = (block < 0).all(axis=1)
        for s, allneg in zip(block_sums.tolist(), block_neg.tolist()):
            state = cusum_update(state, s)
            W.append(state.W)
            sums.append(s)
            neg.append(allneg)
            if state.W >= b:
                trace = CentralizedTrace(np.array(W), np.array(sums), np.array(neg), scenario.K)
                return DetectionOutcome(True, state.n, b), trace
    trace = CentralizedTrace(np.array(W), np.array(sums), np.array(neg), scenario.K)
    return DetectionOutcome(False, horizon, b), trace


def write_trajectory_csv(path, outcome: DetectionOutcome, trace: CentralizedTrace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "W_n", "transmissions", "declared"])
        last = len(trace.W)
        for n, (Wn, t) in enumerate(zip(trace.W.tolist(), trace.transmissions.tolist()), 1):
            w.writerow([n, repr(Wn), t, int(outcome.declared and n == last)])
