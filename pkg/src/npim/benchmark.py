"""Success-probability estimation, time-to-solution, and benchmark suites
with per-family median aggregation and best-of-k parallel-restart readout."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .baselines import AimConfig, CacConfig, aim_run, cac_run, load_baseline_defaults
from .harness import STREAM_BENCH, STREAM_BEST_OF, stream_seeds
from .instances import (
    GraphAdjacency,
    IsingInstance,
    cut_value,
    extract_feasible_set,
)
from .machine import load_model, run_trajectory, unpack_theta

READOUTS = ("energy", "cut", "mis", "clique")
SUMMARY_FORMAT_VERSION = 1


def time_to_solution(t: int, p_s: float) -> float:
    """Iterations needed for 99% cumulative success given per-run success p_s.

    t * log(0.01) / log(1 - p_s); 0 success is infinite, and p_s >= 0.99 is
    capped at t since a single run already meets the criterion.
    """
    if not 0.0 <= p_s <= 1.0:
        raise ValueError(f"p_s must lie in [0, 1], got {p_s}")
    if t < 1:
        raise ValueError("t must be >= 1")
    if p_s == 0.0:
        return math.inf
    if p_s >= 0.99:
        return float(t)
    return t * math.log(0.01) / math.log(1.0 - p_s)


def clopper_pearson_lower_full(runs: int, alpha: float = 0.05) -> float:
    """One-sided (1 - alpha) lower confidence bound on p when every run hit."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    return alpha ** (1.0 / runs)


# ---------------------------------------------------------------------------
# Machine runners
# ---------------------------------------------------------------------------


def make_runner(machine_cfg: dict):
    """Build a `runner(inst, t_total, seed) -> TrajectoryResult` from a machine
    spec dict discriminated by its "machine" field (npim | cac | aim)."""
    kind = machine_cfg.get("machine")
    defaults = load_baseline_defaults()
    if kind == "npim":
        arch, flat, _meta = load_model(machine_cfg["model"])
        tensor = unpack_theta(arch, flat)

        def runner(inst, t_total, seed):
            return run_trajectory(inst, arch, tensor, t_total, seed)

        return runner, "npim"
    if kind == "cac":
        params = dict(defaults["cac"])
        params.update(machine_cfg.get("params", {}))

        def runner(inst, t_total, seed):
            cfg = CacConfig(
                dt=params["dt"],
                a=params["a"],
                xi=params["xi"],
                beta=params["beta"],
                t_total=t_total,
            )
            return cac_run(inst, cfg, seed)

        return runner, "cac"
    if kind == "aim":
        params = dict(defaults["aim"])
        params.update(machine_cfg.get("params", {}))

        def runner(inst, t_total, seed):
            cfg = AimConfig(
                dt=params["dt"],
                alpha=params["alpha"],
                beta=params["beta"],
                gamma=params["gamma"],
                t_total=t_total,
            )
            return aim_run(inst, cfg, seed)

        return runner, "aim"
    raise ValueError(f"unknown machine kind {kind!r}")


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BenchEntry:
    instance: IsingInstance
    readout: str
    t: int
    family: str = ""
    graph: GraphAdjacency | None = None
    target: float | None = None

    def __post_init__(self):
        if self.readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if self.readout in ("cut", "mis", "clique") and self.graph is None:
            raise ValueError(f"readout {self.readout!r} needs the source graph")
        if self.t < 1:
            raise ValueError("t must be >= 1")


@dataclass(frozen=True)
class BenchResult:
    instance_id: str
    family: str
    n: int
    machine: str
    t: int
    runs: int
    hits: int
    p_s: float
    tts: float
    best_objective: float
    target: float
    p_s_lower: float | None = None


@dataclass(frozen=True, eq=False)
class BenchSuite:
    machine: dict
    entries: list[BenchEntry]
    runs: int
    best_of: int | None = None

    def __post_init__(self):
        if not self.entries:
            raise ValueError("benchmark suite has no instances")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.best_of is not None and self.best_of < 1:
            raise ValueError("best_of must be >= 1")


def run_objective(entry: BenchEntry, result) -> float:
    """Benchmark objective of one trajectory: energy, cut value, or the size
    of the repaired feasible set."""
    if entry.readout == "energy":
        return float(result.best_energy)
    if entry.readout == "cut":
        return cut_value(entry.graph, result.best_config)
    return float(len(extract_feasible_set(entry.graph, result.best_config, entry.readout)))


def objective_meets_target(readout: str, objective: float, target: float) -> bool:
    tol = 1e-9 * max(1.0, abs(target))
    if readout == "energy":
        return objective <= target + tol
    return objective >= target - tol


def _entry_objectives(runner, entry: BenchEntry, seeds: np.ndarray) -> list[float]:
    return [run_objective(entry, runner(entry.instance, entry.t, int(s))) for s in seeds]


def success_probability(
    runner,
    entry: BenchEntry,
    runs: int,
    seeds: np.ndarray,
) -> tuple[float, int, int]:
    """Fraction of independent seeded runs whose objective meets the target."""
    if entry.target is None:
        raise ValueError("success_probability needs a target")
    objectives = _entry_objectives(runner, entry, seeds[:runs])
    hits = sum(
        1 for obj in objectives if objective_meets_target(entry.readout, obj, entry.target)
    )
    return hits / runs, hits, runs


def best_of_k(runner, entry: BenchEntry, k: int, seeds: np.ndarray) -> float:
    """Best objective over k parallel restarts (max for cut and set sizes,
    min for raw energy)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    objectives = _entry_objectives(runner, entry, seeds[:k])
    if entry.readout == "energy":
        return min(objectives)
    return max(objectives)


def run_entry(
    runner,
    entry: BenchEntry,
    runs: int,
    seeds: np.ndarray,
    machine_label: str,
) -> BenchResult:
    objectives = _entry_objectives(runner, entry, seeds[:runs])
    if entry.readout == "energy":
        best = min(objectives)
    else:
        best = max(objectives)
    target = entry.target if entry.target is not None else best
    hits = sum(
        1 for obj in objectives if objective_meets_target(entry.readout, obj, target)
    )
    p_s = hits / runs
    return BenchResult(
        instance_id=entry.instance.id,
        family=entry.family,
        n=entry.instance.n,
        machine=machine_label,
        t=entry.t,
        runs=runs,
        hits=hits,
        p_s=p_s,
        tts=time_to_solution(entry.t, p_s),
        best_objective=float(best),
        target=float(target),
        p_s_lower=clopper_pearson_lower_full(runs) if hits == runs else None,
    )


def run_suite(
    suite: BenchSuite,
    master_seed: int,
    *,
    threads: int = 1,
    runner=None,
    machine_label: str | None = None,
) -> tuple[list[BenchResult], dict]:
    """Run every entry and aggregate per-family medians; optionally also the
    best-of-k restart objective per instance.

    A prebuilt runner can be injected (for stubs); by default one is built
    from the suite's machine spec.
    """
    if runner is None:
        runner, label = make_runner(suite.machine)
    else:
        label = machine_label or "custom"

    def job(idx: int) -> BenchResult:
        seeds = stream_seeds(master_seed, STREAM_BENCH, idx, count=suite.runs)
        return run_entry(runner, suite.entries[idx], suite.runs, seeds, label)

    indices = range(len(suite.entries))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, indices))
    else:
        results = [job(i) for i in indices]

    summary: dict = {
        "format_version": SUMMARY_FORMAT_VERSION,
        "machine": label,
        "runs": suite.runs,
        "families": {},
    }
    by_family: dict[str, list[BenchResult]] = {}
    for res in results:
        by_family.setdefault(res.family, []).append(res)
    for family, rows in sorted(by_family.items()):
        tts_vals = [r.tts for r in rows]
        summary["families"][family] = {
            "count": len(rows),
            "median_tts": _json_number(float(np.median(tts_vals))),
            "median_p_s": float(np.median([r.p_s for r in rows])),
        }
    if suite.best_of is not None:
        per_instance = {}
        for idx, entry in enumerate(suite.entries):
            seeds = stream_seeds(master_seed, STREAM_BEST_OF, idx, count=suite.best_of)
            per_instance[entry.instance.id] = best_of_k(runner, entry, suite.best_of, seeds)
        summary["best_of"] = {"k": suite.best_of, "per_instance": per_instance}
    return results, summary


def _json_number(value: float):
    # JSON has no Infinity literal; keep the summary strictly parseable.
    if math.isinf(value):
        return "inf"
    return value


def results_csv_rows(results: list[BenchResult]) -> list[str]:
    """Flat CSV lines for the results table (header included)."""
    header = "instance,family,n,machine,t,runs,hits,p_s,tts,best_objective,target"
    lines = [header]
    for r in results:
        tts = "inf" if math.isinf(r.tts) else repr(r.tts)
        lines.append(
            f"{r.instance_id},{r.family},{r.n},{r.machine},{r.t},{r.runs},"
            f"{r.hits},{r.p_s!r},{tts},{r.best_objective!r},{r.target!r}"
        )
    return lines


def load_gset_targets() -> dict:
    """Published best-known cut values for the standard benchmark graphs."""
    text = resources.files("npim").joinpath("data/gset_targets.json").read_text()
    return json.loads(text)
