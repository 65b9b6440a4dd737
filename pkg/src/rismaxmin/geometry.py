"""Scenario layout: surface lattice, base station and user terminals.

The surface lies in the z = 0 plane with its broadside along +z. Angles are
taken in degrees at the boundary (elevation from the surface normal, azimuth
from +x) and converted to radians once inside :func:`direction_vector`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Direction:
    theta_deg: float
    phi_deg: float

    def __post_init__(self):
        theta = float(self.theta_deg)
        if not np.isfinite(theta) or not 0.0 <= theta < 90.0:
            raise GeometryError(f"theta_deg must lie in [0, 90), got {self.theta_deg}")
        phi = float(self.phi_deg)
        if not np.isfinite(phi):
            raise GeometryError(f"phi_deg must be finite, got {self.phi_deg}")
        phi = phi % 360.0
        if phi == 360.0:  # -tiny % 360 rounds up
            phi = 0.0
        object.__setattr__(self, "theta_deg", theta)
        object.__setattr__(self, "phi_deg", phi)

    @property
    def vector(self) -> np.ndarray:
        return direction_vector(self)


@dataclass(frozen=True)
class Terminal:
    direction: Direction
    distance_m: float

    def __post_init__(self):
        if not self.distance_m > 0:
            raise GeometryError(f"distance_m must be positive, got {self.distance_m}")

    @property
    def position(self) -> np.ndarray:
        return self.distance_m * direction_vector(self.direction)


@dataclass(frozen=True)
class WeightedUser:
    terminal: Terminal
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise GeometryError(f"weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class RisLayout:
    rows: int
    cols: int
    spacing_m: float
    unit_positions: np.ndarray = field(repr=False, compare=False)

    @property
    def n_units(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class Scenario:
    wavelength_m: float
    bs: Terminal
    users: tuple[WeightedUser, ...]
    ris: RisLayout
    tx_power: float = 1.0
    path_loss_mode: str = "as_written"

    def __post_init__(self):
        if not self.wavelength_m > 0:
            raise GeometryError("wavelength_m must be positive")
        if not self.tx_power > 0:
            raise GeometryError("tx_power must be positive")
        users = tuple(self.users)
        if not users:
            raise GeometryError("a scenario needs at least one user")
        object.__setattr__(self, "users", users)
        if self.path_loss_mode not in ("as_written", "standard"):
            raise GeometryError(f"unknown path_loss_mode {self.path_loss_mode!r}")

    @property
    def weights(self) -> np.ndarray:
        return np.array([u.weight for u in self.users])

    def with_users(self, users) -> "Scenario":
        return Scenario(self.wavelength_m, self.bs, tuple(users), self.ris,
                        self.tx_power, self.path_loss_mode)


def wavelength_from_frequency(frequency_hz: float) -> float:
    if not frequency_hz > 0:
        raise GeometryError("frequency_hz must be positive")
    return SPEED_OF_LIGHT / frequency_hz


def direction_vector(d: Direction) -> np.ndarray:
    """Unit vector ``[sin t cos p, sin t sin p, cos t]`` for a direction."""
    theta = np.deg2rad(d.theta_deg)
    phi = np.deg2rad(d.phi_deg)
    return np.array([np.sin(theta) * np.cos(phi),
                     np.sin(theta) * np.sin(phi),
                     np.cos(theta)])


def direction_vectors(theta_deg, phi_deg) -> np.ndarray:
    """Vectorized :func:`direction_vector`; returns shape ``(..., 3)``."""
    theta = np.deg2rad(np.asarray(theta_deg, dtype=float))
    phi = np.deg2rad(np.asarray(phi_deg, dtype=float))
    return np.stack([np.sin(theta) * np.cos(phi),
                     np.sin(theta) * np.sin(phi),
                     np.cos(theta)], axis=-1)


def build_grid_layout(rows: int, cols: int, spacing_m: float) -> RisLayout:
    """Centered ``rows x cols`` lattice in the z = 0 plane.

    Row index runs along y, column index along x. Unit order is row-major.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise GeometryError(f"rows and cols must be positive integers, got {rows}x{cols}")
    if not spacing_m > 0:
        raise GeometryError(f"spacing_m must be positive, got {spacing_m}")
    rows, cols = int(rows), int(cols)
    x = (np.arange(cols) - (cols - 1) / 2.0) * spacing_m
    y = (np.arange(rows) - (rows - 1) / 2.0) * spacing_m
    yy, xx = np.meshgrid(y, x, indexing="ij")
    pos = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(rows * cols)])
    pos.setflags(write=False)
    return RisLayout(rows, cols, float(spacing_m), pos)


def arrival_distance(bs: Terminal, r_i) -> float:
    """Distance from the BS phase center to a unit at ``r_i``."""
    d = float(np.linalg.norm(bs.position - np.asarray(r_i, dtype=float)))
    if d <= 0:
        raise GeometryError("surface unit coincides with the BS position")
    return d


def arrival_distances(bs: Terminal, positions) -> np.ndarray:
    d = np.linalg.norm(bs.position - np.asarray(positions, dtype=float), axis=-1)
    if np.any(d <= 0):
        raise GeometryError("surface unit coincides with the BS position")
    return d


def departure_delay(u, r_i, d_k: float) -> float:
    """Delay distance of a unit relative to a user in direction ``u``.

    Built from the projection ``r'`` of ``r_i`` onto the plane through the
    origin normal to ``u``: ``sgn(<u, r' - r>) * |r' - r| + d_k``.
    """
    u = np.asarray(u, dtype=float)
    r = np.asarray(r_i, dtype=float)
    r_proj = r - np.dot(u, r) * u
    offset = r_proj - r
    return float(np.sign(np.dot(u, offset)) * np.linalg.norm(offset) + d_k)


def departure_delays(u, positions, d_k) -> np.ndarray:
    """Closed form ``d_k - <u, r_i>`` for many units and/or users.

    ``u`` has shape ``(K, 3)`` (or ``(3,)``), ``positions`` shape ``(N, 3)``;
    the result has shape ``(N, K)`` (or ``(N,)``).
    """
    u = np.asarray(u, dtype=float)
    positions = np.asarray(positions, dtype=float)
    return np.asarray(d_k, dtype=float) - positions @ u.T
