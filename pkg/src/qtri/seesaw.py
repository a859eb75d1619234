"""Collective measurement optimization over aligned/anti-aligned qubit patterns.

The target is the prior-averaged score F = sum_g w_g sum_j tr(M_j rho(n_g))
f(n_g, m_j) of a measurement {M_j} whose outcome j reports the guess m_j,
where rho(n) is the pattern's product state along n and f is the direction
fidelity (1 + cos)/2.

Because f is affine in the guess, every quantity the optimizer needs reduces
exactly to four prior moments of the state family:

    R0   = sum_g w_g rho(n_g)          W_j = (R0 + m_j . R) / 2
    R_k  = sum_g w_g (n_g)_k rho(n_g)  v_j = tr(M_j R)  (componentwise)

so iterations cost O(J d^3) regardless of grid size.  Two optimizers live
here: ``seesaw_optimize`` (alternating fixed-point POVM updates and exact
guess updates) and ``brute_force_oracle`` (derivative-free coordinate ascent
over raw Cholesky-like factors, restarted from random points), which shares
no search logic with the see-saw and evaluates its objective by the literal
per-node sum.  The oracle is the yardstick the see-saw is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bloch import (
    Direction,
    SphereGrid,
    fibonacci_grid,
    random_rotation,
    restrict_to_hemisphere,
)
from .errors import NumericalFailureError
from .linalg import hermitianize, projector, psd_sqrt_and_invsqrt, eigh
from .protocol import parse_pattern, pattern_state
from . import seeding

COMPLETENESS_TOL = 1e-8
POSITIVITY_FLOOR = -1e-10
_REPROJECT_TRIGGER = 1e-10
_ROLLBACK_SLACK = 1e-10

DEFAULT_GRID_SIZE = 2000


def default_outcomes(n_qubits: int) -> int:
    """Default outcome count: 30 per qubit (30, 60, 90, 120, ...)."""
    return 30 * n_qubits


@dataclass(frozen=True)
class SeesawConfig:
    """Optimizer knobs: grid size G, outcome count J, stop rule, seed."""

    n_outcomes: int
    grid_size: int = DEFAULT_GRID_SIZE
    tol: float = 1e-8
    max_iter: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n_outcomes < 2:
            raise ValueError(f"need at least 2 outcomes, got {self.n_outcomes}")
        if self.grid_size < self.n_outcomes:
            raise ValueError(
                f"grid size {self.grid_size} must be >= outcome count {self.n_outcomes}"
            )
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class Povm:
    """Measurement elements (J, d, d) paired with guess directions (J, 3)."""

    elements: np.ndarray
    guesses: np.ndarray

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=complex)
        guesses = np.asarray(self.guesses, dtype=float)
        if elements.ndim != 3 or elements.shape[1] != elements.shape[2]:
            raise ValueError(f"elements must be (J, d, d), got {elements.shape}")
        if guesses.shape != (elements.shape[0], 3):
            raise ValueError("one guess direction per element required")
        elements.setflags(write=False)
        guesses.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "guesses", guesses)

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def completeness_residual(self) -> float:
        s = self.elements.sum(axis=0)
        return float(np.linalg.norm(s - np.eye(self.dim), ord="fro"))

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(hermitianize(m)).min() for m in self.elements))

    def validate(self) -> None:
        resid = self.completeness_residual()
        if resid > COMPLETENESS_TOL:
            raise ValueError(f"POVM completeness residual {resid:.3e} > {COMPLETENESS_TOL:.1e}")
        mineig = self.min_eigenvalue()
        if mineig < POSITIVITY_FLOOR:
            raise ValueError(f"POVM element eigenvalue {mineig:.3e} < {POSITIVITY_FLOOR:.1e}")

    def guess_directions(self) -> list[Direction]:
        return [Direction.from_array(g) for g in self.guesses]


@dataclass(frozen=True)
class IterationStats:
    """Diagnostics recorded after each see-saw iteration."""

    objective: float
    completeness_residual: float
    min_eigenvalue: float


@dataclass(frozen=True)
class SeesawResult:
    """Best POVM found, its mean fidelity, and the iteration trace."""

    povm: Povm
    fidelity: float
    converged: bool
    iterations: int
    history: tuple[IterationStats, ...] = field(default_factory=tuple)


class _Problem:
    """Prior moments of one (pattern, grid) instance, shared across updates."""

    def __init__(self, pattern: str, grid: SphereGrid):
        self.pattern = pattern
        self.grid = grid
        states = np.array([pattern_state(pattern, grid.direction(g)) for g in range(len(grid))])
        self.states = states  # (G, d)
        self.dim = states.shape[1]
        w = grid.weights
        self.r0 = hermitianize(np.einsum("g,ga,gb->ab", w, states, states.conj(), optimize=True))
        r = np.einsum("g,gk,ga,gb->kab", w, grid.nodes, states, states.conj(), optimize=True)
        self.r = np.stack([hermitianize(rk) for rk in r])

    def scores(self, guesses: np.ndarray) -> np.ndarray:
        """Score operators W_j = (R0 + m_j . R) / 2, stacked (J, d, d)."""
        return 0.5 * (self.r0[None, :, :] + np.einsum("jk,kab->jab", guesses, self.r))

    def objective(self, elements: np.ndarray, guesses: np.ndarray) -> float:
        w = self.scores(guesses)
        return float(np.einsum("jab,jba->", elements, w).real)

    def guess_vectors(self, elements: np.ndarray) -> np.ndarray:
        """Unnormalized best-response guesses v_j = tr(M_j R), (J, 3)."""
        return np.einsum("jab,kba->jk", elements, self.r).real


def _as_guess_array(guesses) -> np.ndarray:
    if isinstance(guesses, np.ndarray):
        arr = np.asarray(guesses, dtype=float)
    else:
        arr = np.array(
            [g.as_array() if isinstance(g, Direction) else np.asarray(g, dtype=float) for g in guesses]
        )
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"guesses must be (J, 3), got {arr.shape}")
    return arr


def _as_element_array(elements) -> np.ndarray:
    if isinstance(elements, np.ndarray) and elements.ndim == 3:
        return np.asarray(elements, dtype=complex)
    return np.stack([np.asarray(m, dtype=complex) for m in elements])


def score_operators(pattern, guesses, grid: SphereGrid) -> list[np.ndarray]:
    """Per-outcome score operators of the averaged-fidelity objective."""
    problem = _Problem(parse_pattern(pattern), grid)
    w = problem.scores(_as_guess_array(guesses))
    return [hermitianize(wj) for wj in w]


def mean_fidelity(povm: Povm, pattern, grid: SphereGrid) -> float:
    """Prior-averaged fidelity of a POVM-with-guesses, clipped to [0, 1]."""
    problem = _Problem(parse_pattern(pattern), grid)
    if problem.dim != povm.dim:
        raise ValueError(f"POVM dim {povm.dim} does not match pattern dim {problem.dim}")
    return float(np.clip(problem.objective(povm.elements, povm.guesses), 0.0, 1.0))


def _complete_elements(elements: np.ndarray) -> np.ndarray:
    """Repair a PSD element stack so it sums exactly to the identity.

    First the usual S^{-1/2} . S^{-1/2} sandwich; if the sum is rank
    deficient (the whole state family can live in a proper subspace, e.g.
    all-parallel patterns stay inside the symmetric subspace), the sandwich
    only reaches the support projector, so the PSD remainder I - sum is
    spread equally over the elements.  tr(W_j remainder) >= 0, so this never
    lowers the objective; on the patterns above it leaves it unchanged.
    """
    j_count, d = elements.shape[0], elements.shape[1]
    eye = np.eye(d)
    s = hermitianize(elements.sum(axis=0))
    resid = np.linalg.norm(s - eye, ord="fro")
    if resid > _REPROJECT_TRIGGER:
        _, s_invsqrt = psd_sqrt_and_invsqrt(s, null_threshold=1e-12)
        elements = s_invsqrt[None, :, :] @ elements @ s_invsqrt[None, :, :]
        elements = np.stack([hermitianize(m) for m in elements])
        remainder = hermitianize(eye - elements.sum(axis=0))
        if np.linalg.norm(remainder, ord="fro") > _REPROJECT_TRIGGER:
            w, v = eigh(remainder)
            remainder = (v * np.clip(w, 0.0, None)) @ v.conj().T
            elements = elements + remainder[None, :, :] / j_count
        resid = np.linalg.norm(elements.sum(axis=0) - eye, ord="fro")
        if resid > COMPLETENESS_TOL:
            raise NumericalFailureError(f"completeness repair failed, residual {resid:.3e}")
    return elements


def povm_update(povm: Povm, scores) -> Povm:
    """One fixed-point update M_j <- L^{-1/2} W_j M_j W_j L^{-1/2}.

    L = sum_j W_j M_j W_j.  The update is a heuristic ascent step for
    sum_j tr(M_j W_j); its monotonicity is enforced, not assumed: the
    objective is evaluated after the update and the pre-update POVM is
    returned unchanged if it dropped by more than 1e-10.
    """
    w = _as_element_array(scores)
    m = np.asarray(povm.elements)
    if w.shape != m.shape:
        raise ValueError(f"scores shape {w.shape} does not match elements {m.shape}")
    obj_before = float(np.einsum("jab,jba->", m, w).real)
    wmw = w @ m @ w
    lam = hermitianize(wmw.sum(axis=0))
    lam_eigs = np.linalg.eigvalsh(lam)
    if lam_eigs[-1] <= 1e-250:
        raise NumericalFailureError("score-weighted operator sum vanished")
    _, lam_invsqrt = psd_sqrt_and_invsqrt(lam, null_threshold=1e-12 * lam_eigs[-1])
    updated = lam_invsqrt[None, :, :] @ wmw @ lam_invsqrt[None, :, :]
    updated = np.stack([hermitianize(x) for x in updated])
    updated = _complete_elements(updated)
    obj_after = float(np.einsum("jab,jba->", updated, w).real)
    if obj_after < obj_before - _ROLLBACK_SLACK:
        return povm
    return Povm(updated, povm.guesses.copy())


def guess_update(povm: Povm, pattern, grid: SphereGrid) -> Povm:
    """Replace every guess with its exact best response v_j / |v_j|.

    For f = (1 + n.m)/2 the conditionally optimal guess for outcome j is the
    normalized v_j = sum_g w_g tr(M_j rho(n_g)) n_g, so the objective never
    decreases.  Near-zero v_j (isotropic outcome) keeps the previous guess.
    """
    problem = _Problem(parse_pattern(pattern), grid)
    return _guess_update_internal(povm, problem)


def _guess_update_internal(povm: Povm, problem: _Problem) -> Povm:
    v = problem.guess_vectors(povm.elements)
    norms = np.linalg.norm(v, axis=1)
    new_guesses = povm.guesses.copy()
    ok = norms >= 1e-12
    new_guesses[ok] = v[ok] / norms[ok, None]
    return Povm(povm.elements.copy(), new_guesses)


def initial_povm(pattern: str, n_outcomes: int, rng: np.random.Generator) -> Povm:
    """Starting point: pattern-state projectors along J spread directions.

    The direction frame is a Fibonacci set under a random rotation drawn from
    ``rng``; raw projectors are symmetrized to completeness with the
    S^{-1/2} sandwich (plus remainder repair on deficient patterns).
    """
    rot, _ = random_rotation(rng)
    dirs = fibonacci_grid(n_outcomes).nodes @ rot.T
    raw = np.stack(
        [projector(pattern_state(pattern, Direction.from_array(v))) for v in dirs]
    )
    s = hermitianize(raw.sum(axis=0))
    top = np.linalg.eigvalsh(s)[-1]
    _, s_invsqrt = psd_sqrt_and_invsqrt(s, null_threshold=1e-12 * max(top, 1.0))
    elements = s_invsqrt[None, :, :] @ raw @ s_invsqrt[None, :, :]
    elements = np.stack([hermitianize(m) for m in elements])
    eye = np.eye(elements.shape[1])
    remainder = hermitianize(eye - elements.sum(axis=0))
    if np.linalg.norm(remainder, ord="fro") > _REPROJECT_TRIGGER:
        w, v = eigh(remainder)
        remainder = (v * np.clip(w, 0.0, None)) @ v.conj().T
        elements = elements + remainder[None, :, :] / n_outcomes
    return Povm(elements, dirs)


def seesaw_optimize(
    pattern,
    config: SeesawConfig,
    hemisphere_hint: Optional[Direction] = None,
) -> SeesawResult:
    """Alternate POVM and guess updates until the objective stalls.

    Stops when the relative objective change drops below ``config.tol`` or
    after ``config.max_iter`` alternations; in the latter case the best
    POVM so far is returned with ``converged=False``.
    """
    pat = parse_pattern(pattern)
    grid = fibonacci_grid(config.grid_size)
    if hemisphere_hint is not None:
        grid = restrict_to_hemisphere(grid, hemisphere_hint)
    problem = _Problem(pat, grid)
    rng = seeding.rng_for(config.seed, seeding.STREAM_SEESAW)
    povm = initial_povm(pat, config.n_outcomes, rng)

    fidelity = problem.objective(povm.elements, povm.guesses)
    history = [
        IterationStats(fidelity, povm.completeness_residual(), povm.min_eigenvalue())
    ]
    best_povm, best_fid = povm, fidelity
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        scores = problem.scores(povm.guesses)
        povm = povm_update(povm, scores)
        povm = _guess_update_internal(povm, problem)
        new_fidelity = problem.objective(povm.elements, povm.guesses)
        history.append(
            IterationStats(new_fidelity, povm.completeness_residual(), povm.min_eigenvalue())
        )
        if new_fidelity > best_fid:
            best_povm, best_fid = povm, new_fidelity
        if abs(new_fidelity - fidelity) <= config.tol * max(abs(fidelity), 1e-30):
            fidelity = new_fidelity
            converged = True
            break
        fidelity = new_fidelity
    return SeesawResult(
        povm=best_povm,
        fidelity=float(np.clip(best_fid, 0.0, 1.0)),
        converged=converged,
        iterations=iterations,
        history=tuple(history),
    )


def result_to_json_dict(pattern, config: SeesawConfig, result: SeesawResult) -> dict:
    """JSON-ready summary: F, per-outcome guesses and element spectra."""
    outcomes = []
    for m, g in zip(result.povm.elements, result.povm.guesses):
        eigs = np.linalg.eigvalsh(hermitianize(m))
        outcomes.append(
            {
                "guess": {"x": float(g[0]), "y": float(g[1]), "z": float(g[2])},
                "eigenvalues": [float(e) for e in eigs],
            }
        )
    return {
        "pattern": parse_pattern(pattern),
        "config": {
            "grid": config.grid_size,
            "outcomes": config.n_outcomes,
            "tol": config.tol,
            "max_iter": config.max_iter,
            "seed": config.seed,
        },
        "fidelity": result.fidelity,
        "converged": result.converged,
        "iterations": result.iterations,
        "outcomes": outcomes,
    }


# ---------------------------------------------------------------------------
# Independent validation oracle
# ---------------------------------------------------------------------------


def brute_force_oracle(
    pattern,
    grid_size: int,
    n_outcomes: int,
    restarts: int = 32,
    seed: int = 7,
) -> float:
    """Best averaged fidelity found by restarted coordinate ascent.

    Raw elements are parameterized as B_j B_j^dagger from free complex
    factors and whitened to completeness with the S^{-1/2} sandwich, so every
    candidate is a valid POVM by construction.  Derivative-free ascent walks
    the real/imaginary factor entries and the guess angles with a shrinking
    step ladder, restarted from ``restarts`` random points.  The objective is
    evaluated by the literal per-node sum, sharing no code path with the
    moment-based see-saw it validates.  Small instances only (one or two
    qubits).
    """
    pat = parse_pattern(pattern)
    if len(pat) > 2:
        raise ValueError("the brute-force oracle only handles one- or two-qubit patterns")
    if restarts < 1:
        raise ValueError("need at least one restart")
    grid = fibonacci_grid(grid_size)
    states = np.array([pattern_state(pat, grid.direction(g)) for g in range(len(grid))])
    ascent = _OracleAscent(states, grid.nodes, grid.weights, n_outcomes)
    rng = seeding.rng_for(seed, seeding.STREAM_ORACLE)
    best = 0.0
    for _ in range(restarts):
        best = max(best, ascent.run(rng))
    return best


class _OracleAscent:
    """Coordinate ascent state for one (pattern states, grid) instance.

    The objective is always the literal grid sum F = sum_g w_g sum_j
    p_jg f_jg.  For speed it is folded two compatible ways: factor moves
    (guesses fixed) contract against per-node-summed score operators, angle
    moves (factors fixed) against cached outcome probabilities.  Both are
    plain reorderings of the same finite sum, so every candidate is scored
    identically.
    """

    _FACTOR_STEPS = (0.5, 0.2, 0.08, 0.03, 0.012, 0.005, 0.002)
    _MIN_GAIN = 1e-12
    _MAX_SWEEPS_PER_STEP = 60

    def __init__(self, states: np.ndarray, nodes: np.ndarray, weights: np.ndarray, n_outcomes: int):
        self.states = states
        self.states_conj = states.conj()
        self.nodes = nodes
        self.weights = weights
        self.j_count = n_outcomes
        self.dim = states.shape[1]
        self.eye = np.eye(self.dim)

    def _whitened_elements(self, factors: np.ndarray) -> np.ndarray:
        """M_j = S^{-1/2} B_j B_j^dagger S^{-1/2}, pseudo-inverted on S's null space."""
        raw = factors @ factors.conj().transpose(0, 2, 1)
        s = raw.sum(axis=0)
        s = (s + s.conj().T) / 2
        w, v = np.linalg.eigh(s)
        if w[-1] <= 1e-250:
            raise NumericalFailureError("degenerate factor set: S vanished")
        scale = np.where(w > 1e-12 * w[-1], 1.0 / np.sqrt(np.clip(w, 1e-300, None)), 0.0)
        s_invsqrt = (v * scale) @ v.conj().T
        return s_invsqrt[None, :, :] @ raw @ s_invsqrt[None, :, :]

    def outcome_probs(self, factors: np.ndarray) -> np.ndarray:
        """(J, G) outcome probabilities, the unclaimed remainder spread equally."""
        elements = self._whitened_elements(factors)
        amp = np.einsum("ga,jab,gb->jg", self.states_conj, elements, self.states, optimize=True)
        probs = np.clip(amp.real, 0.0, None)
        leftover = np.clip(1.0 - probs.sum(axis=0), 0.0, None)
        return probs + leftover[None, :] / self.j_count

    def fidelities(self, angles: np.ndarray) -> np.ndarray:
        """(J, G) direction fidelities of the guesses against the grid."""
        m = _angles_to_vectors(angles)
        return 0.5 * (1.0 + m @ self.nodes.T)

    def score_ops(self, fids: np.ndarray) -> np.ndarray:
        """Literal per-node sums sum_g w_g f_jg rho_g, stacked (J, d, d)."""
        wf = self.weights[None, :] * fids
        return np.einsum("jg,ga,gb->jab", wf, self.states, self.states_conj, optimize=True)

    def _factor_objective(self, factors: np.ndarray, score: np.ndarray, score_sum: np.ndarray) -> float:
        elements = self._whitened_elements(factors)
        f = np.einsum("jab,jba->", elements, score).real
        leftover = self.eye - elements.sum(axis=0)
        return float(f + np.einsum("ab,ba->", leftover, score_sum).real / self.j_count)

    def objective(self, probs: np.ndarray, fids: np.ndarray) -> float:
        return float(np.einsum("jg,jg,g->", probs, fids, self.weights))

    def run(self, rng: np.random.Generator) -> float:
        factors = (
            rng.standard_normal((self.j_count, self.dim, self.dim))
            + 1j * rng.standard_normal((self.j_count, self.dim, self.dim))
        ) / math.sqrt(2.0 * self.dim)
        angles = np.column_stack(
            [np.arccos(rng.uniform(-1.0, 1.0, self.j_count)), rng.uniform(0.0, 2.0 * math.pi, self.j_count)]
        )
        best = self.objective(self.outcome_probs(factors), self.fidelities(angles))
        for step in self._FACTOR_STEPS:
            for _ in range(self._MAX_SWEEPS_PER_STEP):
                best, factor_moved = self._sweep_factors(factors, angles, best, step)
                best, angle_moved = self._sweep_angles(factors, angles, best, 2.0 * step)
                if not (factor_moved or angle_moved):
                    break
        return best

    def _sweep_factors(self, factors, angles, best, step):
        score = self.score_ops(self.fidelities(angles))
        score_sum = score.sum(axis=0)
        moved = False
        deltas = (step, -step, 1j * step, -1j * step)
        for j in range(self.j_count):
            for a in range(self.dim):
                for b in range(self.dim):
                    for delta in deltas:
                        factors[j, a, b] += delta
                        trial = self._factor_objective(factors, score, score_sum)
                        if trial > best + self._MIN_GAIN:
                            best, moved = trial, True
                        else:
                            factors[j, a, b] -= delta
        return best, moved

    def _fid_row(self, angles: np.ndarray, j: int) -> np.ndarray:
        theta, phi = angles[j]
        m = (math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta))
        return 0.5 * (1.0 + self.nodes @ m)

    def _sweep_angles(self, factors, angles, best, step):
        wp = self.outcome_probs(factors) * self.weights[None, :]
        moved = False
        for j in range(self.j_count):
            # moving outcome j's guess only changes its own fidelity row,
            # so best = base + wp[j] . f_j with base fixed for this j
            base = best - float(wp[j] @ self._fid_row(angles, j))
            for k in (0, 1):
                for delta in (step, -step):
                    angles[j, k] += delta
                    trial = base + float(wp[j] @ self._fid_row(angles, j))
                    if trial > best + self._MIN_GAIN:
                        best, moved = trial, True
                    else:
                        angles[j, k] -= delta
        return best, moved


def _angles_to_vectors(angles: np.ndarray) -> np.ndarray:
    theta, phi = angles[:, 0], angles[:, 1]
    sin_t = np.sin(theta)
    return np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), np.cos(theta)])
