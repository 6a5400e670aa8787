"""Ordered transmissions for CUSUM (ordered-CUSUM).

In each slot the cliques report in order of decreasing |L_k|. After the j-th
report the fusion center holds the partial sum W_{n-1} + sum of the first j
ordered statistics. The untransmitted remainder is at most (K - j) |L_(j)|,
so once the partial sum falls to -(K - j) |L_(j)| or below, W_n is known to be
zero and the slot ends early.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .detector import DetectionOutcome, slot_stream
from .model import SlotStatistics

DEFAULT_ETA = 1e-3


@dataclass(frozen=True, eq=False)
class SlotOutcome:
    W_next: float
    transmissions_used: int
    halted_early: bool
    partial_sums: np.ndarray
    thresholds: np.ndarray
    transmit_times: np.ndarray | None = None

    @property
    def k_star(self) -> int:
        return self.transmissions_used


def transmit_times(stats: SlotStatistics, eta: float = DEFAULT_ETA, t_n: float = 0.0) -> np.ndarray:
    """t_{n,k} = t_n + eta / |L_k|; a zero statistic never goes first (+inf)."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    mag = np.abs(stats.raw)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(mag > 0, t_n + eta / mag, math.inf)


def run_slot(W_prev: float, stats: SlotStatistics) -> SlotOutcome:
    if W_prev < 0:
        raise ValueError("W_prev must be nonnegative")
    Lhat = stats.ordered
    K = len(Lhat)
    partial = np.cumsum(np.concatenate(([W_prev], Lhat)))[1:]
    # the last threshold is exactly zero, which reproduces the max{0, .} clamp
    phi = -(K - np.arange(1, K + 1)) * np.abs(Lhat)
    hit = partial <= phi
    if hit.any():
        j = int(hit.argmax()) + 1
        W_next = 0.0
    else:
        j = K
        W_next = float(partial[-1])
    return SlotOutcome(W_next, j, bool(hit.any() and j < K), partial[:j], phi[:j])


def k_star_oracle(W_prev: float, stats: SlotStatistics, strict: bool = False) -> int:
    """Brute-force count of transmissions needed in one slot.

    Smallest k' < K with W_prev + sum_{k<=k'} Lhat_k <= -(K - k') |Lhat_k'|,
    or K if there is none. ``strict=True`` uses < instead of <=.
    """
    raw = [float(v) for v in stats.raw]
    K = len(raw)
    ranked = sorted(range(K), key=lambda i: (-abs(raw[i]), i))
    total = W_prev
    for kp in range(1, K):
        total = total + raw[ranked[kp - 1]]
        bound = -(K - kp) * abs(raw[ranked[kp - 1]])
        if total < bound or (not strict and total == bound):
            return kp
    return K


@dataclass(frozen=True, eq=False)
class SavingsTrace:
    K: int
    k_star: np.ndarray
    W: np.ndarray
    halted_early: np.ndarray

    @property
    def saved(self) -> np.ndarray:
        return self.K - self.k_star

    @property
    def total_saved(self) -> int:
        return int(self.saved.sum())

    @property
    def running_saved(self) -> np.ndarray:
        return np.cumsum(self.saved)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "k_star", "saved", "W_n", "halted_early"])
            rows = zip(self.k_star.tolist(), self.saved.tolist(), self.W.tolist(),
                       self.halted_early.tolist())
            for n, (k, s, Wn, h) in enumerate(rows, 1):
                w.writerow([n, k, s, repr(Wn), int(h)])


def run_ordered(scenario, coeffs, b: float, tau, horizon: int, rng):
    """Ordered-CUSUM run; same sampling and stopping rule as run_centralized."""
    if not b > 0:
        raise ValueError("threshold b must be positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    W = 0.0
    ks, Ws, halts = [], [], []
    declared = False
    for block in slot_stream(scenario, coeffs, tau, horizon, rng):
        for row in block:
            out = run_slot(W, SlotStatistics.from_raw(row))
            W = out.W_next
            ks.append(out.transmissions_used)
            Ws.append(W)
            halts.append(out.halted_early)
            if W >= b:
                declared = True
                break
        if declared:
            break
    trace = SavingsTrace(scenario.K, np.array(ks, dtype=int), np.array(Ws), np.array(halts, dtype=bool))
    n = len(ks)
    return DetectionOutcome(declared, n if declared else horizon, b), trace
