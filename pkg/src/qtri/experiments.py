"""Monte Carlo benchmark harness.

Each trial draws a ground truth, runs the protocol, lets Bob estimate with
the configured strategy, and scores fidelity and angular error.  Per-trial
seeds are mixed from (master seed, enumeration index), so results are
bit-identical no matter how many worker threads run the trials.
"""

from __future__ import annotations

import math
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bloch import Direction, SphereGrid, angle_between, direction_fidelity, fibonacci_grid
from .errors import ConfigurationError, SizeLimitError
from .estimators import bob_estimate
from .protocol import (
    MAX_QUBITS,
    EstimateRecord,
    ProtocolConfig,
    Transcript,
    alice_measure,
    alice_rng,
    bob_rng,
    sample_truth,
)
from .serialize import canonical_json, format_float
from . import seeding

STRATEGIES = ("frame", "mle", "collective")

RESULT_COLUMNS = ("n", "strategy", "trial", "seed", "fidelity", "angle_deg")
SUMMARY_COLUMNS = ("n", "strategy", "trials", "mean_fidelity", "std_err", "mean_angle_deg")


@dataclass(frozen=True)
class BenchmarkConfig:
    """A benchmark sweep: one strategy across particle counts."""

    strategy: str
    n_values: tuple[int, ...]
    trials: int
    master_seed: int
    grid_size: int = 2000
    hemisphere_hint: Optional[Direction] = None
    threads: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not self.n_values:
            raise ConfigurationError("n_values must be non-empty")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.strategy == "collective" and max(self.n_values) > MAX_QUBITS:
            raise SizeLimitError(
                f"collective strategy caps at {MAX_QUBITS} qubits, got n={max(self.n_values)}"
            )
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))


@dataclass(frozen=True)
class TrialResult:
    """One protocol run scored against the hidden truth."""

    n: int
    strategy: str
    trial: int
    seed: int
    fidelity: float
    angle_deg: float


@dataclass(frozen=True)
class Summary:
    """Aggregate over all trials with the same (n, strategy)."""

    n: int
    strategy: str
    trials: int
    mean_fidelity: float
    std_err: float
    mean_angle_deg: float


def run_session(
    config: ProtocolConfig,
    strategy: str,
    *,
    grid: Optional[SphereGrid] = None,
    seesaw_config=None,
    povm_cache: Optional[dict] = None,
) -> Transcript:
    """One full in-process protocol run: sample truth, measure, estimate.

    This is the single-binary reference path; the networked endpoints
    reproduce it exactly from the same seed.
    """
    truth = sample_truth(config)
    outcomes = alice_measure(truth, config, alice_rng(config.seed))
    direction, label = bob_estimate(
        strategy,
        [o.alice_outcome for o in outcomes],
        truth.a_z,
        bob_rng(config.seed),
        grid=grid,
        hemisphere_hint=config.hemisphere_hint,
        seesaw_config=seesaw_config,
        povm_cache=povm_cache,
    )
    return Transcript(
        config=config,
        outcomes=tuple(outcomes),
        estimate=EstimateRecord(direction, label),
        truth=truth,
    )


def run_trials(config: BenchmarkConfig) -> list[TrialResult]:
    """Run the full sweep; output order is sorted by (n, trial)."""
    grid = fibonacci_grid(config.grid_size) if config.strategy in ("mle", "collective") else None
    povm_cache: dict = {}
    cache_lock = threading.Lock()

    jobs = []
    index = 0
    for n in config.n_values:
        for trial in range(config.trials):
            jobs.append((n, trial, seeding.mix64(config.master_seed, index)))
            index += 1

    def one(job: tuple[int, int, int]) -> TrialResult:
        n, trial, seed = job
        proto = ProtocolConfig(n, seed, config.hemisphere_hint)
        if config.strategy == "collective":
            with cache_lock:
                # POVMs are optimized lazily per pattern and shared across trials
                transcript = run_session(
                    proto, config.strategy, grid=grid, povm_cache=povm_cache,
                    seesaw_config=_collective_config(config, n),
                )
        else:
            transcript = run_session(proto, config.strategy, grid=grid)
        est = transcript.estimate.direction
        truth = transcript.truth.a_z
        return TrialResult(
            n=n,
            strategy=config.strategy,
            trial=trial,
            seed=seed,
            fidelity=direction_fidelity(truth, est),
            angle_deg=math.degrees(angle_between(truth, est)),
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(job) for job in jobs]
    return sorted(results, key=lambda r: (r.n, r.strategy, r.trial))


def _collective_config(config: BenchmarkConfig, n: int):
    from .seesaw import SeesawConfig, default_outcomes

    return SeesawConfig(
        n_outcomes=default_outcomes(n),
        grid_size=config.grid_size,
        seed=seeding.mix64(config.master_seed, seeding.STREAM_SEESAW),
    )


def summarize(results: Sequence[TrialResult]) -> list[Summary]:
    """Group by (n, strategy); std_err is the sample std over sqrt(trials)."""
    if not results:
        raise ValueError("no results to summarize")
    groups: dict[tuple[int, str], list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.n, r.strategy), []).append(r)
    out = []
    for (n, strategy) in sorted(groups):
        rs = groups[(n, strategy)]
        fids = np.array([r.fidelity for r in rs])
        angles = np.array([r.angle_deg for r in rs])
        std_err = float(fids.std(ddof=1) / math.sqrt(len(rs))) if len(rs) > 1 else 0.0
        out.append(
            Summary(
                n=n,
                strategy=strategy,
                trials=len(rs),
                mean_fidelity=float(fids.mean()),
                std_err=std_err,
                mean_angle_deg=float(angles.mean()),
            )
        )
    return out


def fit_power_law(summaries: Sequence[Summary]) -> float:
    """Least-squares slope of log(mean angle) against log(n)."""
    if len({s.strategy for s in summaries}) > 1:
        raise ValueError("fit expects summaries from a single strategy")
    ns = [s.n for s in summaries]
    angles = [s.mean_angle_deg for s in summaries]
    if len(set(ns)) < 3:
        raise ValueError("need at least 3 distinct n values to fit")
    if any(a <= 0 for a in angles):
        raise ValueError("cannot fit a power law through zero angles")
    slope = np.polyfit(np.log(np.array(ns, dtype=float)), np.log(np.array(angles)), 1)[0]
    return float(slope)


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-export-")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def summary_csv_path(path: str) -> str:
    """Sibling file carrying the summaries table of a CSV export."""
    stem, ext = os.path.splitext(path)
    return f"{stem}.summary{ext or '.csv'}"


def export(
    results: Sequence[TrialResult],
    summaries: Sequence[Summary],
    format: str,
    path: str,
) -> None:
    """Write results/summaries to disk (atomically, stable float formatting).

    csv: the results table goes to ``path`` and the summaries table to
    ``summary_csv_path(path)``.  json: a single document with both lists.
    """
    if format == "csv":
        lines = [",".join(RESULT_COLUMNS)]
        for r in results:
            lines.append(",".join(_csv_cell(getattr(r, c)) for c in RESULT_COLUMNS))
        _atomic_write(path, "\n".join(lines) + "\n")
        lines = [",".join(SUMMARY_COLUMNS)]
        for s in summaries:
            lines.append(",".join(_csv_cell(getattr(s, c)) for c in SUMMARY_COLUMNS))
        _atomic_write(summary_csv_path(path), "\n".join(lines) + "\n")
    elif format == "json":
        doc = {
            "results": [
                {c: getattr(r, c) for c in RESULT_COLUMNS} for r in results
            ],
            "summaries": [
                {c: getattr(s, c) for c in SUMMARY_COLUMNS} for s in summaries
            ],
        }
        _atomic_write(path, canonical_json(doc) + "\n")
    else:
        raise ConfigurationError(f"format must be csv or json, got {format!r}")
