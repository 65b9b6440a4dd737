"""Phase quantization, scattered-power patterns and wide-beam synthesis."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channel import assemble_channel, channel_for_directions
from .geometry import Direction, GeometryError, Scenario, Terminal, WeightedUser, direction_vector
from .maxmin import PhaseConfig, Solution, SolverOptions, evaluate, solve_maxmin, user_powers

DEFAULT_PROBE_RANGE_M = 15.0


def quantize_phases(phases, bits: int) -> PhaseConfig:
    """Snap each phase to the nearest of ``2**bits`` uniform levels.

    Distance wraps around 2 pi; exact midpoints go to the lower level.
    """
    if int(bits) != bits or not 1 <= bits <= 8:
        raise ValueError(f"bits must be an integer in [1, 8], got {bits}")
    bits = int(bits)
    levels = 2 ** bits
    step = 2 * np.pi / levels
    omega = phases.omega if isinstance(phases, PhaseConfig) else np.mod(np.asarray(phases, float), 2 * np.pi)
    m = np.ceil(omega / step - 0.5).astype(np.int64) % levels
    return PhaseConfig(m * step, bit_depth=bits)


def wrap_distance(a, b) -> np.ndarray:
    d = np.mod(np.asarray(a) - np.asarray(b), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


@dataclass(frozen=True)
class PatternGrid:
    theta_samples: np.ndarray
    phi_samples: np.ndarray
    power: np.ndarray
    range_m: float
    normalized: bool = False

    def to_csv(self, path) -> None:
        """One row per cell, theta-major: theta_deg, phi_deg, power, power_db_normalized."""
        peak = float(self.power.max())
        with np.errstate(divide="ignore"):
            db = 10 * np.log10(self.power / peak) if peak > 0 else np.full_like(self.power, -np.inf)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta_deg", "phi_deg", "power", "power_db_normalized"])
            for a, th in enumerate(self.theta_samples):
                for b, ph in enumerate(self.phi_samples):
                    w.writerow([repr(float(th)), repr(float(ph)),
                                repr(float(self.power[a, b])), repr(float(db[a, b]))])


def scattered_pattern(s: Scenario, phases, theta_samples, phi_samples,
                      range_m: float = DEFAULT_PROBE_RANGE_M, normalize: bool = False) -> PatternGrid:
    """Received power of a probe user placed at each (theta, phi) on the grid."""
    theta = np.asarray(theta_samples, dtype=float)
    phi = np.asarray(phi_samples, dtype=float)
    if theta.size == 0 or phi.size == 0:
        raise ValueError("sample lists must be nonempty")
    if np.any(theta < 0) or np.any(theta >= 90):
        raise GeometryError("theta samples must lie in [0, 90)")
    if not range_m > 0:
        raise GeometryError("range_m must be positive")
    if isinstance(phases, PhaseConfig):
        phases = phases.omega
    power = np.empty((theta.size, phi.size))
    for a, th in enumerate(theta):
        h = channel_for_directions(s, np.full(phi.size, th), phi, range_m)
        power[a] = user_powers(h, phases, s.tx_power)
    if normalize:
        power = power / power.max()
    return PatternGrid(theta, phi, power, float(range_m), normalize)


@dataclass(frozen=True)
class RegionSpec:
    center: Direction
    angular_radius_deg: float
    sub_beam_count: int = 37

    def __post_init__(self):
        if not self.angular_radius_deg > 0:
            raise ValueError("angular_radius_deg must be positive")
        if int(self.sub_beam_count) != self.sub_beam_count or self.sub_beam_count < 1:
            raise ValueError("sub_beam_count must be a positive integer")


def _ring_count(count: int) -> int:
    rings = 0
    while 1 + 3 * rings * (rings + 1) < count:
        rings += 1
    return rings


def _offset_direction(center: Direction, offset_deg: float, bearing: float) -> tuple[float, float]:
    c = direction_vector(center)
    th, ph = np.deg2rad(center.theta_deg), np.deg2rad(center.phi_deg)
    e_theta = np.array([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)])
    e_phi = np.array([-np.sin(ph), np.cos(ph), 0.0])
    d = np.deg2rad(offset_deg)
    v = np.cos(d) * c + np.sin(d) * (np.cos(bearing) * e_theta + np.sin(bearing) * e_phi)
    theta = float(np.rad2deg(np.arccos(np.clip(v[2], -1.0, 1.0))))
    phi = float(np.rad2deg(np.arctan2(v[1], v[0]))) % 360.0
    return theta, phi


def widebeam_directions(region: RegionSpec) -> list[Direction]:
    """Sub-beam directions in concentric hexagonal rings around the center.

    Ring ``m`` (of ``M``) holds ``6 m`` points at angular offset ``m r / M``;
    37 directions give rings 1 + 6 + 12 + 18. An incomplete outer ring is
    spread evenly over its circle.
    """
    count = int(region.sub_beam_count)
    rings = _ring_count(count)
    out = [region.center]
    for m in range(1, rings + 1):
        n = min(6 * m, count - len(out))
        offset = region.angular_radius_deg * m / rings
        for j in range(n):
            theta, phi = _offset_direction(region.center, offset, 2 * np.pi * j / n)
            if theta >= 90.0:
                raise GeometryError(
                    f"region around ({region.center.theta_deg}, {region.center.phi_deg}) "
                    f"with radius {region.angular_radius_deg} deg crosses theta = 90")
            out.append(Direction(theta, phi))
    return out


def power_ratio_report(powers) -> np.ndarray:
    p = np.asarray(powers, dtype=float)
    if p.size == 0 or p[0] == 0:
        raise ValueError("first power must be nonzero")
    if np.any(p < 0):
        raise ValueError("powers must be nonnegative")
    return p / p[0]


def ratio_deviation(ratios, target) -> np.ndarray:
    """Relative error of each achieved ratio against its target."""
    ratios, target = np.asarray(ratios, float), np.asarray(target, float)
    return np.abs(ratios - target) / target


@dataclass(frozen=True)
class CoverageReport:
    min_power: float
    max_power: float
    ripple_db: float
    samples: int

    def to_dict(self) -> dict:
        return {"min_power": self.min_power, "max_power": self.max_power,
                "ripple_db": self.ripple_db, "samples": self.samples}


def region_coverage(s: Scenario, phases, region: RegionSpec,
                    range_m: float = DEFAULT_PROBE_RANGE_M, rings: int | None = None) -> CoverageReport:
    """Min/max/ripple of the scattered power over a dense ring sampling of the region."""
    if rings is None:
        rings = 2 * max(_ring_count(region.sub_beam_count), 1)
    dense = RegionSpec(region.center, region.angular_radius_deg, 1 + 3 * rings * (rings + 1))
    dirs = widebeam_directions(dense)
    h = channel_for_directions(s, [d.theta_deg for d in dirs], [d.phi_deg for d in dirs], range_m)
    pw = user_powers(h, phases, s.tx_power)
    lo, hi = float(pw.min()), float(pw.max())
    return CoverageReport(lo, hi, float(10 * np.log10(hi / lo)), len(dirs))


def widebeam_scenario(s: Scenario, region: RegionSpec,
                      range_m: float = DEFAULT_PROBE_RANGE_M) -> Scenario:
    """Replace the users of ``s`` with equal-weight virtual users over the region."""
    users = [WeightedUser(Terminal(d, range_m), 1.0) for d in widebeam_directions(region)]
    return s.with_users(users)


def design_widebeam(s: Scenario, region: RegionSpec, opts: SolverOptions | None = None,
                    range_m: float = DEFAULT_PROBE_RANGE_M):
    """Max-min design over the sub-beam directions; returns ``(solution, coverage, scenario)``."""
    virtual = widebeam_scenario(s, region, range_m)
    sol = solve_maxmin(assemble_channel(virtual), virtual.weights, opts, virtual.tx_power)
    return sol, region_coverage(virtual, sol.phases, region, range_m), virtual


def requantized(s: Scenario, sol: Solution, bits: int) -> Solution:
    """Quantize a solution's phases and re-evaluate every user on ``s``."""
    q = quantize_phases(sol.phases, bits)
    return evaluate(assemble_channel(s), s.weights, q, s.tx_power, tau=sol.tau,
                    status="quantized")


def distance_sweep(s: Scenario, user: int, distances, opts: SolverOptions | None = None) -> np.ndarray:
    """Optimal user powers as one user is moved along its direction.

    Returns an array of shape ``(len(distances), K)``; each row is a fresh
    max-min solve with the other users held fixed.
    """
    rows = []
    for d in distances:
        users = list(s.users)
        u = users[user]
        users[user] = WeightedUser(Terminal(u.terminal.direction, float(d)), u.weight)
        moved = s.with_users(users)
        sol = solve_maxmin(assemble_channel(moved), moved.weights, opts, moved.tx_power)
        rows.append(sol.user_powers)
    return np.array(rows)
