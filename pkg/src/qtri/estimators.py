"""Bob's particle-by-particle strategies.

Two local estimators operate on one qubit at a time: the frame-vector readout
(thirds of the qubits measured along x, y, z, component means normalized) and
a grid maximum-likelihood search.  The dispatcher ``bob_estimate`` also covers
the collective strategy, which delegates to the see-saw optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bloch import Direction, SphereGrid, X_AXIS, Y_AXIS, Z_AXIS, restrict_to_hemisphere
from .errors import ConfigurationError
from .protocol import pattern_from_outcomes, pattern_state

# Round-robin axis assignment for the local strategies, in record order.
LOCAL_AXES = (X_AXIS, Y_AXIS, Z_AXIS)

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class LocalMeasurementRecord:
    """One local measurement: axis choice, Bob's result, Alice's announcement."""

    index: int
    axis: Direction
    bob_outcome: int
    alice_outcome: int


@dataclass(frozen=True)
class FrameEstimate:
    """Frame-vector result; ``degenerate`` marks the all-zero-means fallback."""

    direction: Direction
    degenerate: bool


def simulate_local_measurement(
    alice_outcome: int, a_z: Direction, axis: Direction, rng: np.random.Generator
) -> int:
    """Sample Bob's +-1 outcome measuring his collapsed qubit along ``axis``.

    Bob's Bloch vector is b = -alice_outcome * a_z, so the outcome is +1 with
    probability (1 + b . axis) / 2.
    """
    p_plus = 0.5 * (1.0 - alice_outcome * a_z.dot(axis))
    return +1 if rng.random() < p_plus else -1


def measure_round_robin(
    alice_outcomes: Sequence[int], a_z: Direction, rng: np.random.Generator
) -> list[LocalMeasurementRecord]:
    """Measure every qubit locally with axes cycling x, y, z."""
    records = []
    for i, outcome in enumerate(alice_outcomes):
        axis = LOCAL_AXES[i % 3]
        bob = simulate_local_measurement(outcome, a_z, axis, rng)
        records.append(LocalMeasurementRecord(i, axis, bob, outcome))
    return records


def _corrected_outcomes(records: Sequence[LocalMeasurementRecord]) -> np.ndarray:
    # c = -alice * bob has expectation a_z . axis
    return np.array([-r.alice_outcome * r.bob_outcome for r in records], dtype=float)


def estimate_frame_vector(records: Sequence[LocalMeasurementRecord]) -> FrameEstimate:
    """Per-axis means of corrected outcomes, normalized to a direction.

    Each record is attributed to its nearest coordinate axis (sign folded into
    the corrected outcome).  A vanishing mean vector falls back to +z with the
    degenerate flag set.
    """
    if not records:
        raise ValueError("no measurement records")
    sums = np.zeros(3)
    counts = np.zeros(3)
    corrected = _corrected_outcomes(records)
    for r, c in zip(records, corrected):
        axis = r.axis.as_array()
        k = int(np.argmax(np.abs(axis)))
        sign = 1.0 if axis[k] >= 0 else -1.0
        sums[k] += sign * c
        counts[k] += 1
    means = np.divide(sums, counts, out=np.zeros(3), where=counts > 0)
    norm = float(np.linalg.norm(means))
    if norm < 1e-12:
        return FrameEstimate(Z_AXIS, degenerate=True)
    return FrameEstimate(Direction.from_array(means), degenerate=False)


def estimate_mle(
    records: Sequence[LocalMeasurementRecord],
    grid: SphereGrid,
    hemisphere_hint: Optional[Direction] = None,
) -> Direction:
    """Grid node maximizing the log-likelihood of the local outcomes.

    Ties break toward the lowest node index; per-record likelihoods are
    clamped at 1e-300 so a single zero-probability node cannot poison the
    scan with -inf comparisons.
    """
    if not records:
        raise ValueError("no measurement records")
    if hemisphere_hint is not None:
        grid = restrict_to_hemisphere(grid, hemisphere_hint)
    axes = np.array([r.axis.as_array() for r in records])
    corrected = _corrected_outcomes(records)
    # (G, R) per-record likelihoods (1 + c * n.axis) / 2
    likelihood = 0.5 * (1.0 + grid.nodes @ (axes * corrected[:, None]).T)
    loglik = np.log(np.clip(likelihood, _LOG_FLOOR, None)).sum(axis=1)
    return grid.direction(int(np.argmax(loglik)))


def bob_estimate(
    strategy: str,
    alice_outcomes: Sequence[int],
    a_z: Direction,
    rng: np.random.Generator,
    *,
    grid: Optional[SphereGrid] = None,
    hemisphere_hint: Optional[Direction] = None,
    seesaw_config=None,
    povm_cache: Optional[dict] = None,
) -> tuple[Direction, str]:
    """Run one full Bob-side estimate for a list of announced outcomes.

    ``a_z`` stands in for the physical qubits in Bob's box: his simulated
    measurement outcomes depend on it, his estimate never sees it directly.

    With zero particles there is nothing to measure and the estimate is the
    prior's blind guess: the hemisphere hint if one is set, else +z.
    """
    if strategy not in ("frame", "mle", "collective"):
        raise ConfigurationError(f"unknown strategy {strategy!r}")
    if len(alice_outcomes) == 0:
        return (hemisphere_hint if hemisphere_hint is not None else Z_AXIS), strategy
    if strategy in ("frame", "mle"):
        records = measure_round_robin(alice_outcomes, a_z, rng)
        if strategy == "frame":
            return estimate_frame_vector(records).direction, "frame"
        if grid is None:
            raise ConfigurationError("mle strategy requires a sphere grid")
        return estimate_mle(records, grid, hemisphere_hint), "mle"
    return _collective_estimate(
        alice_outcomes, a_z, rng, hemisphere_hint, seesaw_config, povm_cache
    )


def _collective_estimate(
    alice_outcomes, a_z, rng, hemisphere_hint, seesaw_config, povm_cache
) -> tuple[Direction, str]:
    from . import seesaw  # local import: seesaw is the heavyweight module

    pattern = pattern_from_outcomes(list(alice_outcomes))
    if seesaw_config is None:
        seesaw_config = seesaw.SeesawConfig(n_outcomes=seesaw.default_outcomes(len(pattern)))
    if povm_cache is not None and pattern in povm_cache:
        povm = povm_cache[pattern]
    else:
        result = seesaw.seesaw_optimize(pattern, seesaw_config, hemisphere_hint=hemisphere_hint)
        povm = result.povm
        if povm_cache is not None:
            povm_cache[pattern] = povm
    psi = pattern_state(pattern, a_z)
    probs = np.einsum("a,jab,b->j", psi.conj(), povm.elements, psi).real
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    j = int(np.searchsorted(np.cumsum(probs), rng.random()))
    j = min(j, len(probs) - 1)
    return Direction.from_array(povm.guesses[j]), "collective"
