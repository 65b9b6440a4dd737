"""Composite BS -> surface -> user channel gains."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import (GeometryError, Scenario, arrival_distances, departure_delays,
                       direction_vectors)

PATH_LOSS_MODES = ("as_written", "standard")


@dataclass(frozen=True)
class ChannelMatrix:
    """``N x K`` complex gains ``h[i, k]`` from the BS via unit ``i`` to user ``k``."""

    entries: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.entries, dtype=complex)
        if h.ndim != 2:
            raise ValueError("channel entries must be a 2-D array")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def n_units(self) -> int:
        return self.entries.shape[0]

    @property
    def n_users(self) -> int:
        return self.entries.shape[1]

    @property
    def beta(self) -> np.ndarray:
        return np.abs(self.entries)

    @property
    def psi(self) -> np.ndarray:
        return np.mod(np.angle(self.entries), 2 * np.pi)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["unit_index", "user_index", "re", "im", "beta", "psi"])
            beta, psi = self.beta, self.psi
            for i in range(self.n_units):
                for k in range(self.n_users):
                    h = self.entries[i, k]
                    w.writerow([i, k, repr(float(h.real)), repr(float(h.imag)),
                                repr(float(beta[i, k])), repr(float(psi[i, k]))])


def bs_ris_gain(d_arr, wavelength):
    """Free-space gain ``wl / (4 pi d) * exp(+j 2 pi d / wl)`` on the incident leg."""
    d_arr = np.asarray(d_arr, dtype=float)
    if np.any(d_arr <= 0) or wavelength <= 0:
        raise ValueError("arrival distance and wavelength must be positive")
    phase = np.mod(2 * np.pi * d_arr / wavelength, 2 * np.pi)
    return wavelength / (4 * np.pi * d_arr) * np.exp(1j * phase)


def ris_ue_gain(d_dep, d_k, wavelength, mode: str = "as_written"):
    """Gain on the reflected leg for delay distance ``d_dep``.

    ``as_written`` uses the loss ``wl / (4 pi (d_dep + d_k))``; ``standard``
    uses ``wl / (4 pi d_dep)``. The phase is ``2 pi d_dep / wl`` either way.
    """
    d_dep = np.asarray(d_dep, dtype=float)
    d_k = np.asarray(d_k, dtype=float)
    if mode == "as_written":
        denom = d_dep + d_k
    elif mode == "standard":
        denom = d_dep
    else:
        raise ValueError(f"unknown path loss mode {mode!r}")
    if np.any(denom <= 0) or wavelength <= 0:
        raise ValueError("path loss denominator must be positive")
    phase = np.mod(2 * np.pi * d_dep / wavelength, 2 * np.pi)
    return wavelength / (4 * np.pi * denom) * np.exp(1j * phase)


def channel_for_directions(s: Scenario, theta_deg, phi_deg, distances) -> np.ndarray:
    """Raw ``N x K`` gains for arbitrary user directions (no weights needed)."""
    u = direction_vectors(np.atleast_1d(theta_deg), np.atleast_1d(phi_deg))
    d_k = np.broadcast_to(np.asarray(distances, dtype=float), (u.shape[0],))
    if np.any(d_k <= 0):
        raise GeometryError("user distances must be positive")
    pos = s.ris.unit_positions
    d_arr = arrival_distances(s.bs, pos)
    d_dep = departure_delays(u, pos, d_k)
    return bs_ris_gain(d_arr, s.wavelength_m)[:, None] * ris_ue_gain(
        d_dep, d_k[None, :], s.wavelength_m, s.path_loss_mode)


def assemble_channel(s: Scenario) -> ChannelMatrix:
    theta = [u.terminal.direction.theta_deg for u in s.users]
    phi = [u.terminal.direction.phi_deg for u in s.users]
    dist = [u.terminal.distance_m for u in s.users]
    return ChannelMatrix(channel_for_directions(s, theta, phi, dist))
