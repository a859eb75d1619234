"""The triangulation protocol itself.

Alice measures each of her singlet halves along her local vertical and
announces the results; each announcement collapses Bob's partner qubit to the
opposite spin state along that same (to Bob unknown) axis.  Her outcomes are
a fair coin regardless of the axis, so the announced bits alone carry no
direction information; all of it sits in Bob's collapsed qubits plus the
aligned/anti-aligned pattern the bits reveal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bloch import Direction, random_direction, spin_state
from .errors import SizeLimitError
from .serialize import canonical_json
from . import seeding

MAX_QUBITS = 8


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol run: particle count, master seed, optional hemisphere hint."""

    n_particles: int
    seed: int
    hemisphere_hint: Optional[Direction] = None

    def __post_init__(self):
        if self.n_particles < 0:
            raise ValueError(f"n_particles must be >= 0, got {self.n_particles}")


@dataclass(frozen=True)
class GroundTruth:
    """Referee-only record of Alice's actual vertical axis."""

    a_z: Direction


@dataclass(frozen=True)
class OutcomeRecord:
    """Alice's announced result (+1 up, -1 down) for one particle."""

    index: int
    alice_outcome: int

    def __post_init__(self):
        if self.alice_outcome not in (+1, -1):
            raise ValueError(f"outcome must be +1 or -1, got {self.alice_outcome}")


@dataclass(frozen=True)
class EstimateRecord:
    """Bob's final guess and the strategy that produced it."""

    direction: Direction
    strategy: str


@dataclass(frozen=True)
class Transcript:
    """Seeded record of one run.

    ``truth`` is referee-only: it never appears in the serialized form and
    never crosses the channel.
    """

    config: ProtocolConfig
    outcomes: tuple[OutcomeRecord, ...] = field(default_factory=tuple)
    estimate: Optional[EstimateRecord] = None
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        if len(self.outcomes) != self.config.n_particles:
            raise ValueError(
                f"{len(self.outcomes)} outcomes for n_particles={self.config.n_particles}"
            )


def truth_rng(seed: int) -> np.random.Generator:
    return seeding.rng_for(seed, seeding.STREAM_TRUTH)


def alice_rng(seed: int) -> np.random.Generator:
    return seeding.rng_for(seed, seeding.STREAM_ALICE)


def bob_rng(seed: int) -> np.random.Generator:
    return seeding.rng_for(seed, seeding.STREAM_BOB)


def sample_truth(config: ProtocolConfig) -> GroundTruth:
    """Draw the ground-truth axis for a session from its seed.

    Uniform on the sphere, restricted by rejection to the hinted hemisphere
    when the config carries one.
    """
    rng = truth_rng(config.seed)
    hint = config.hemisphere_hint
    while True:
        d = random_direction(rng)
        if hint is None or d.dot(hint) > 0.0:
            return GroundTruth(d)


def alice_measure(
    truth: GroundTruth, config: ProtocolConfig, rng: np.random.Generator
) -> list[OutcomeRecord]:
    """Alice's outcomes: independent fair coins.

    Her half of each singlet is maximally mixed, so the distribution does not
    depend on ``truth`` at all; the argument is kept to mirror the physical
    setup (she measures real particles along her real vertical).
    """
    del truth
    bits = rng.integers(0, 2, size=config.n_particles)
    return [OutcomeRecord(i, int(2 * b - 1)) for i, b in enumerate(bits)]


def bob_collapsed_state(outcome: int, a_z: Direction) -> np.ndarray:
    """Bob's qubit after Alice announces ``outcome``: the anti-aligned state."""
    if outcome == +1:
        return spin_state(a_z, "down")
    if outcome == -1:
        return spin_state(a_z, "up")
    raise ValueError(f"outcome must be +1 or -1, got {outcome}")


def parse_pattern(pattern) -> str:
    """Normalize a pattern ('ud', ['up','down'], ...) to a string of u/d."""
    if isinstance(pattern, str):
        chars = list(pattern)
    else:
        chars = [str(p) for p in pattern]
    out = []
    for c in chars:
        c = c.lower()
        if c in ("u", "up"):
            out.append("u")
        elif c in ("d", "down"):
            out.append("d")
        else:
            raise ValueError(f"pattern entries must be up/down, got {c!r}")
    if len(out) > MAX_QUBITS:
        raise SizeLimitError(f"pattern length {len(out)} exceeds {MAX_QUBITS} qubits")
    if not out:
        raise ValueError("pattern must be non-empty")
    return "".join(out)


def pattern_state(pattern, n: Direction) -> np.ndarray:
    """Tensor product of spin states along ``n`` following the pattern."""
    pat = parse_pattern(pattern)
    up = spin_state(n, "up")
    down = spin_state(n, "down")
    state = np.array([1.0 + 0.0j])
    for c in pat:
        state = np.kron(state, up if c == "u" else down)
    return state


def pattern_from_outcomes(outcomes: Sequence[int]) -> str:
    """Bob's aligned/anti-aligned pattern implied by Alice's announcements."""
    if len(outcomes) > MAX_QUBITS:
        raise SizeLimitError(f"{len(outcomes)} qubits exceed the {MAX_QUBITS}-qubit cap")
    return "".join("d" if o == +1 else "u" for o in outcomes)


def _direction_json(d: Optional[Direction]):
    if d is None:
        return None
    return {"x": d.x, "y": d.y, "z": d.z}


def transcript_to_json(t: Transcript) -> str:
    """Canonical JSON for a transcript; the truth field is never included."""
    estimate = None
    if t.estimate is not None:
        estimate = {
            "strategy": t.estimate.strategy,
            **_direction_json(t.estimate.direction),
        }
    doc = {
        "config": {
            "n": t.config.n_particles,
            "seed": t.config.seed,
            "hemisphere": _direction_json(t.config.hemisphere_hint),
        },
        "outcomes": [r.alice_outcome for r in t.outcomes],
        "estimate": estimate,
    }
    return canonical_json(doc)
