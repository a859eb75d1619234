"""Bloch-sphere geometry.

Directions double as points on the Earth sphere (+z = North pole, +x = prime
meridian at the equator) and as spin axes.  The accuracy score between a true
and a guessed direction is the squared state overlap f = (1 + cos theta) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

_UNIT_TOL = 1e-12
_GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class Direction:
    """Unit 3-vector."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x * self.x + self.y * self.y + self.z * self.z
        if not math.isfinite(n2) or abs(n2 - 1.0) > _UNIT_TOL:
            raise ValueError(f"direction must be unit length, |v|^2 = {n2!r}")

    @classmethod
    def normalized(cls, x: float, y: float, z: float) -> "Direction":
        """Build a direction from any non-zero vector."""
        norm = math.sqrt(x * x + y * y + z * z)
        if not norm > 0.0 or not math.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        # `+ 0.0` maps -0.0 components to +0.0 for stable serialization
        return cls(x / norm + 0.0, y / norm + 0.0, z / norm + 0.0)

    @classmethod
    def from_array(cls, v) -> "Direction":
        v = np.asarray(v, dtype=float)
        return cls.normalized(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def dot(self, other: "Direction") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def __neg__(self) -> "Direction":
        return Direction(-self.x + 0.0, -self.y + 0.0, -self.z + 0.0)


X_AXIS = Direction(1.0, 0.0, 0.0)
Y_AXIS = Direction(0.0, 1.0, 0.0)
Z_AXIS = Direction(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class SphereGrid:
    """Quadrature nodes and weights for integrals over the unit sphere.

    nodes: (G, 3) array of unit rows; weights: (G,) nonnegative, summing to 1.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or nodes.shape[0] == 0:
            raise ValueError(f"nodes must be a non-empty (G, 3) array, got {nodes.shape}")
        if weights.shape != (nodes.shape[0],):
            raise ValueError("weights length must match node count")
        if np.any(weights < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _UNIT_TOL:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        norms = np.linalg.norm(nodes, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("grid nodes must be unit vectors")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.shape[0]

    def direction(self, i: int) -> Direction:
        return Direction.from_array(self.nodes[i])


def spin_state(n: Direction, sign: str) -> np.ndarray:
    """Spin-1/2 eigenstate along a direction.

    'up' is (cos t/2, e^{i p} sin t/2) with t the polar angle and p the
    azimuth of n; 'down' is the orthogonal state, pinned so that
    spin_state(+z, down) = (0, 1) exactly.
    """
    theta = math.acos(max(-1.0, min(1.0, n.z)))
    phi = math.atan2(n.y, n.x)
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    phase = complex(math.cos(phi), math.sin(phi))
    if sign == "up":
        return np.array([c, phase * s], dtype=complex)
    if sign == "down":
        return np.array([-phase.conjugate() * s, c], dtype=complex)
    raise ValueError(f"sign must be 'up' or 'down', got {sign!r}")


def direction_fidelity(a: Direction, b: Direction) -> float:
    """(1 + a.b) / 2, clipped into [0, 1] against round-off."""
    return min(1.0, max(0.0, 0.5 * (1.0 + a.dot(b))))


def angle_between(a: Direction, b: Direction) -> float:
    """Angle in radians, in [0, pi]."""
    return math.acos(max(-1.0, min(1.0, a.dot(b))))


def random_direction(rng: np.random.Generator) -> Direction:
    """Uniform point on the sphere: z uniform in [-1, 1], azimuth uniform."""
    z = rng.uniform(-1.0, 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    r = math.sqrt(max(0.0, 1.0 - z * z))
    return Direction.normalized(r * math.cos(phi), r * math.sin(phi), z)


def fibonacci_grid(count: int) -> SphereGrid:
    """Golden-angle spiral grid with equal weights 1/G.

    The z values are symmetric about 0 (offset-half spacing), so the node
    average cancels exactly in z and to O(1/G) in x, y.
    """
    if count < 1:
        raise ValueError(f"grid size must be >= 1, got {count}")
    i = np.arange(count, dtype=float)
    z = 1.0 - 2.0 * (i + 0.5) / count
    azimuth = 2.0 * math.pi * i / _GOLDEN_RATIO
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    nodes = np.column_stack([r * np.cos(azimuth), r * np.sin(azimuth), z])
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    weights = np.full(count, 1.0 / count)
    return SphereGrid(nodes, weights)


def restrict_to_hemisphere(grid: SphereGrid, hint: Direction) -> SphereGrid:
    """Keep nodes with n.hint > 0 and renormalize weights to sum 1."""
    keep = grid.nodes @ hint.as_array() > 0.0
    if not keep.any():
        raise ConfigurationError("hemisphere restriction removed every grid node")
    weights = grid.weights[keep]
    return SphereGrid(grid.nodes[keep].copy(), weights / weights.sum())


def direction_to_latlon(n: Direction) -> tuple[float, float]:
    """Latitude/longitude in degrees; lat in [-90, 90], lon in (-180, 180]."""
    lat = math.degrees(math.asin(max(-1.0, min(1.0, n.z))))
    lon = math.degrees(math.atan2(n.y, n.x))
    if lon <= -180.0:
        lon = 180.0
    return lat, lon


def random_rotation(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Haar-uniform rotation as a matched (SO(3) matrix, SU(2) unitary) pair.

    Sampled through a uniform unit quaternion q = (w, x, y, z), so that
    U (sigma . n) U^dagger = sigma . (R n) holds exactly.
    """
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    rot = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    unitary = np.array(
        [
            [w - 1j * z, -1j * x - y],
            [-1j * x + y, w + 1j * z],
        ],
        dtype=complex,
    )
    return rot, unitary


def rotate_grid(grid: SphereGrid, rot: np.ndarray) -> SphereGrid:
    """Apply a rotation matrix to every node; weights unchanged."""
    return SphereGrid(grid.nodes @ np.asarray(rot, dtype=float).T, grid.weights.copy())
