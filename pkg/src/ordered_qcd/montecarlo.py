"""Monte Carlo experiments: threshold calibration, savings and sweeps.

Per-run random streams derive from ``SeedSequence(master_seed,
spawn_key=(cell, stream, run))`` so results do not depend on how runs are
scheduled across workers.
"""

from __future__ import annotations

import copy
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from . import graph as G
from . import model as Mdl
from .detector import cusum_path, run_centralized, slot_stream
from .ordering import run_ordered

log = logging.getLogger(__name__)

GRID_STEP = 0.01
EVAL_STREAM, CALIB_STREAM = 0, 1


class CalibrationFailed(RuntimeError):
    pass


def _parse_tau(tau):
    if tau is None or tau in ("inf", "infinity", math.inf):
        return math.inf
    tau = int(tau)
    if tau < 1:
        raise ValueError("tau must be >= 1")
    return tau


@dataclass(frozen=True)
class ScenarioSpec:
    """Graph and model description, in the same shape as the config file."""

    graph: dict
    model: dict

    def build_graph(self):
        g = self.graph
        kind = g["kind"]
        if kind == "chain":
            return G.chain_graph(int(g["K"]))
        if kind == "tree":
            return G.tree_graph(int(g["K"]))
        if kind == "explicit":
            return G.UndirectedGraph.from_edges(int(g["M"]), g["edges"])
        if kind == "pair":
            pre = G.UndirectedGraph.from_edges(int(g["pre"]["M"]), g["pre"]["edges"])
            post = G.UndirectedGraph.from_edges(int(g["post"]["M"]), g["post"]["edges"])
            return pre, post
        raise ValueError(f"unknown graph kind {kind!r}")

    def build(self) -> Mdl.GaussianScenario:
        g = self.build_graph()
        m = self.model
        kind = m["kind"]
        if isinstance(g, tuple):
            pre, post = g
            if kind == "mean_shift":
                return Mdl.build_structure_change_scenario(
                    pre, post, float(m["c"]), float(m.get("w", 0.25)), m.get("w_post"))
            if kind == "explicit":
                return Mdl.build_explicit_scenario(
                    G.union_graph(pre, post), m["mu0"], m["sigma0"], m["mu1"], m["sigma1"],
                    graph0=pre, graph1=post)
            raise ValueError(f"model kind {kind!r} is not supported for graph pairs")
        if kind == "mean_shift":
            return Mdl.build_mean_shift_scenario(g, float(m["c"]), float(m.get("w", 0.25)))
        if kind == "cov_change":
            return Mdl.build_cov_change_scenario(g, float(m["x"]))
        if kind == "explicit":
            return Mdl.build_explicit_scenario(g, m["mu0"], m["sigma0"], m["mu1"], m["sigma1"])
        raise ValueError(f"unknown model kind {kind!r}")

    def with_value(self, variable: str, value) -> "ScenarioSpec":
        graph, model = copy.deepcopy(self.graph), copy.deepcopy(self.model)
        if variable == "K":
            if graph["kind"] not in ("chain", "tree"):
                raise ValueError("K sweeps need a chain or tree graph")
            graph["K"] = int(value)
        elif variable in ("c", "x"):
            model[variable] = float(value)
        else:
            raise ValueError(f"cannot sweep {variable!r}")
        return ScenarioSpec(graph, model)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioSpec
    gamma: float = 1000.0
    b: float | str = "calibrate"
    tau: float = math.inf
    horizon: int = 1000
    runs: int = 100
    xi: float | str = "auto"
    eta: float = 1e-3
    master_seed: int = 0
    calibration_horizon: int | None = None
    b_max: float = 1000.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tau", _parse_tau(self.tau))
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.runs < 1 or self.horizon < 1:
            raise ValueError("runs and horizon must be >= 1")
        if self.b != "calibrate" and not float(self.b) > 0:
            raise ValueError("b must be positive or 'calibrate'")

    @property
    def calib_horizon(self) -> int:
        return self.calibration_horizon or int(math.ceil(10 * self.gamma))

    def coefficients(self, K: int) -> Mdl.CoefficientSet:
        xi = Mdl.auto_xi(K) if self.xi == "auto" else float(self.xi)
        return Mdl.build_coefficients(K, xi)


def run_rng(master_seed: int, cell: int, stream: int, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(cell, stream, run)))


def _map(fn, items, workers):
    if workers <= 1:
        return list(map(fn, items))
    items = list(items)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


# -- calibration --------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationResult:
    b: float
    arl: float  # estimated E_inf of the stopping time at b (censored runs count as horizon)
    censored_fraction: float
    horizon: int


def _running_max_path(run, scenario, coeffs, horizon, seed, cell):
    rng = run_rng(seed, cell, CALIB_STREAM, run)
    sums = np.concatenate([blk.sum(axis=1) for blk in
                           slot_stream(scenario, coeffs, math.inf, horizon, rng, chunk=4096)])
    return np.maximum.accumulate(cusum_path(sums))


def grid_value(i: int) -> float:
    return round(i * GRID_STEP, 2)


def _arl(paths, b, horizon):
    stops = [np.searchsorted(rm, b, side="left") + 1 if rm[-1] >= b else horizon for rm in paths]
    censored = sum(bool(rm[-1] < b) for rm in paths)
    return float(np.mean(stops)), censored / len(paths)


def calibrate(config: ExperimentConfig, cell: int = 0, scenario=None) -> CalibrationResult:
    """Smallest b on the 0.01 grid with estimated E_inf(stop) >= gamma.

    All grid points share the same no-change paths, so each run's stopping
    time is nondecreasing in b. Exponential bracketing followed by bisection
    over the grid index therefore returns the same b as an upward scan in
    0.01 steps.
    """
    scenario = scenario or config.scenario.build()
    coeffs = config.coefficients(scenario.K)
    H = config.calib_horizon
    fn = partial(_running_max_path, scenario=scenario, coeffs=coeffs, horizon=H,
                 seed=config.master_seed, cell=cell)
    paths = _map(fn, range(config.runs), config.workers)

    def ok(i):
        return _arl(paths, grid_value(i), H)[0] >= config.gamma

    i_max = int(round(config.b_max / GRID_STEP))
    if not ok(i_max):
        raise CalibrationFailed(f"E_inf below gamma={config.gamma} even at b={config.b_max}")
    lo, hi = 0, 1
    while not ok(hi):
        lo, hi = hi, min(2 * hi, i_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    b = grid_value(hi)
    arl, cens = _arl(paths, b, H)
    if cens > 0.01:
        log.warning("%.1f%% of calibration runs censored at horizon %d; E_inf is a lower bound",
                    100 * cens, H)
    return CalibrationResult(b, arl, cens, H)


def calibrate_threshold(config: ExperimentConfig) -> float:
    return calibrate(config).b


# -- savings ------------------------------------------------------------------


def bound_coefficient(K: int) -> int:
    return math.ceil(K / 2) - 1


@dataclass(frozen=True, eq=False)
class SavingsReport:
    K: int
    runs: int
    horizon: int
    total_saved: float
    per_slot_saved: np.ndarray
    per_slot_prob: np.ndarray  # Pr(W_{n-1} = 0 and all L_k < 0), pooled over runs
    lower_bound_empirical: float
    lower_bound_limit: float
    wadd: float | None
    calibrated_b: float
    equivalent: bool
    max_abs_dW: float
    alarms: int
    censored_fraction: float
    distance: float | None = None
    extras: dict = field(default_factory=dict)

    def row(self, value=None) -> list:
        wadd = "" if self.wadd is None else repr(self.wadd)
        return [value, repr(self.total_saved), repr(self.lower_bound_empirical),
                repr(self.lower_bound_limit), wadd, repr(self.calibrated_b)]

    def summary(self) -> str:
        lines = [
            f"K = {self.K}, runs = {self.runs}, horizon = {self.horizon}, b = {self.calibrated_b}",
            f"total transmissions saved (mean per run): {self.total_saved:.2f}",
            f"empirical lower bound: {self.lower_bound_empirical:.2f}",
            f"limiting lower bound: {self.lower_bound_limit:.2f}",
            f"alarms: {self.alarms}/{self.runs}",
            f"equivalent: {str(self.equivalent).lower()} (max |dW| = {self.max_abs_dW:.3g})",
        ]
        if self.wadd is not None:
            lines.append(f"WADD: {self.wadd:.4f}")
        return "\n".join(lines)

    def write_per_slot_csv(self, path):
        c = bound_coefficient(self.K)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "mean_saved", "prob_zero_all_negative", "lower_bound"])
            for n, (s, p) in enumerate(zip(self.per_slot_saved.tolist(),
                                           self.per_slot_prob.tolist()), 1):
                w.writerow([n, repr(s), repr(p), repr(c * p)])


@dataclass(frozen=True, eq=False)
class PairedRun:
    saved: np.ndarray
    zero_and_negative: np.ndarray
    max_abs_dW: float
    same_outcome: bool
    declared: bool
    stop_slot: int


def paired_run(run, scenario, coeffs, b, tau, horizon, seed, cell) -> PairedRun:
    """One ordered and one centralized run driven by the same seed."""
    out_c, tr_c = run_centralized(scenario, coeffs, b, tau, horizon, run_rng(seed, cell, EVAL_STREAM, run))
    out_o, tr_o = run_ordered(scenario, coeffs, b, tau, horizon, run_rng(seed, cell, EVAL_STREAM, run))
    n = min(len(tr_c.W), len(tr_o.W))
    dW = float(np.abs(tr_c.W[:n] - tr_o.W[:n]).max()) if n else 0.0
    same = (out_c.declared == out_o.declared and out_c.stop_slot == out_o.stop_slot
            and len(tr_c.W) == len(tr_o.W))
    W_prev = np.concatenate(([0.0], tr_c.W[:-1]))
    return PairedRun(tr_o.saved, (W_prev == 0.0) & tr_c.all_negative, dW, same,
                     out_c.declared, out_c.stop_slot)


def savings_experiment(config: ExperimentConfig, cell: int = 0, scenario=None,
                       b: float | None = None) -> SavingsReport:
    """Paired ordered/centralized runs and the transmission-savings report.

    Slots after a run has stopped contribute no transmissions and no savings.
    """
    scenario = scenario or config.scenario.build()
    K = scenario.K
    coeffs = config.coefficients(K)
    if b is None:
        b = calibrate(config, cell, scenario).b if config.b == "calibrate" else float(config.b)
    H = config.horizon
    fn = partial(paired_run, scenario=scenario, coeffs=coeffs, b=b, tau=config.tau,
                 horizon=H, seed=config.master_seed, cell=cell)
    results = _map(fn, range(config.runs), config.workers)

    saved = np.zeros(H)
    cond = np.zeros(H)
    for r in results:
        saved[: len(r.saved)] += r.saved
        cond[: len(r.zero_and_negative)] += r.zero_and_negative
    per_slot_saved = saved / config.runs
    prob = cond / config.runs
    coef = bound_coefficient(K)
    tau_eff = min(config.tau, H + 1)

    wadd = None
    if config.tau == 1:
        # censored runs contribute horizon - 1, a lower bound on their delay
        wadd = float(np.mean([r.stop_slot - 1 for r in results]))
    alarms = sum(r.declared for r in results)
    return SavingsReport(
        K=K,
        runs=config.runs,
        horizon=H,
        total_saved=float(saved.sum() / config.runs),
        per_slot_saved=per_slot_saved,
        per_slot_prob=prob,
        lower_bound_empirical=float(coef * prob.sum()),
        lower_bound_limit=float(coef * (tau_eff - 1)),
        wadd=wadd,
        calibrated_b=float(b),
        equivalent=all(r.same_outcome for r in results) and max(r.max_abs_dW for r in results) < 1e-9,
        max_abs_dW=max(r.max_abs_dW for r in results),
        alarms=alarms,
        censored_fraction=1.0 - alarms / config.runs,
        distance=scenario.distance,
        extras={"outcomes": [(r.declared, r.stop_slot, int(r.saved.sum())) for r in results],
                "identical_runs": sum(r.same_outcome and r.max_abs_dW < 1e-9 for r in results)},
    )


def sweep(config: ExperimentConfig, variable: str, values) -> list[tuple]:
    """One savings experiment per value; cell i uses seeds derived from (seed, i)."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    out = []
    for cell, v in enumerate(values):
        cfg = replace(config, scenario=config.scenario.with_value(variable, v))
        out.append((v, savings_experiment(cfg, cell=cell)))
    return out


SWEEP_COLUMNS = ["sweep_value", "total_saved", "lower_bound_empirical", "lower_bound_limit",
                 "wadd", "calibrated_b"]


def write_sweep_csv(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for value, rep in table:
            w.writerow(rep.row(value))
