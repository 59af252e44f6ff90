"""Physical-layer math for a MISO mmWave downlink.

Array steering vectors for a uniform planar array (UPA) in the yz-plane,
close-in path loss with a frequency-dependent exponent, geometric channel
assembly, SINR and Shannon rate.

Angles follow the physics convention: elevation ``theta`` measured from +z,
azimuth ``phi`` measured from +x.  UPA elements are enumerated with the
horizontal index ``m`` varying fastest, i.e. flat index ``n * n_th + m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True)
class UpaGeometry:
    n_th: int
    n_tv: int
    spacing_m: float
    wavelength_m: float

    def __post_init__(self):
        if self.n_th < 1 or self.n_tv < 1:
            raise ValueError("UPA needs at least one element per axis")
        if self.spacing_m <= 0 or self.wavelength_m <= 0:
            raise ValueError("spacing and wavelength must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_th * self.n_tv

    @classmethod
    def half_wavelength(cls, n_th: int, n_tv: int, freq_hz: float) -> "UpaGeometry":
        lam = SPEED_OF_LIGHT / freq_hz
        return cls(n_th, n_tv, lam / 2.0, lam)


@dataclass(frozen=True)
class PathLossParams:
    """Close-in path loss parameters (defaults: street canyon LOS)."""

    exponent: float = 1.98
    freq_dep: float = 0.0
    ref_freq_hz: float = 1e9
    shadow_sigma_db: float = 3.1

    def __post_init__(self):
        if self.exponent <= 0:
            raise ValueError("path loss exponent must be positive")
        if self.ref_freq_hz <= 0:
            raise ValueError("reference frequency must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow sigma must be non-negative")


@dataclass(frozen=True)
class PropagationPath:
    gain: complex
    aod_azimuth_rad: float
    aod_elevation_rad: float
    aoa_azimuth_rad: float = 0.0
    aoa_elevation_rad: float = 0.0


def _element_indices(geom: UpaGeometry):
    # m-major: m varies fastest
    n, m = np.divmod(np.arange(geom.n_elements), geom.n_th)
    return m, n


def array_response(azimuth_rad, elevation_rad, geom: UpaGeometry) -> np.ndarray:
    """UPA steering vector(s), unit norm.

    Scalar angles give a vector of length ``N_T``; array-valued angles of
    equal shape ``S`` give an array of shape ``S + (N_T,)``.
    """
    phi = np.asarray(azimuth_rad, dtype=float)[..., None]
    theta = np.asarray(elevation_rad, dtype=float)[..., None]
    m, n = _element_indices(geom)
    k = 2.0 * np.pi / geom.wavelength_m * geom.spacing_m
    phase = k * (m * np.sin(phi) * np.sin(theta) + n * np.cos(theta))
    return np.exp(1j * phase) / np.sqrt(geom.n_elements)


def path_loss_db(freq_hz, dist_m, params: PathLossParams, shadow_db=0.0):
    """Path loss in dB. Distances below 1 m are clamped to 1 m."""
    d = np.maximum(np.asarray(dist_m, dtype=float), 1.0)
    fspl_1m = 20.0 * np.log10(4.0 * np.pi * freq_hz / SPEED_OF_LIGHT)
    slope = 10.0 * params.exponent * (1.0 + params.freq_dep * (freq_hz - params.ref_freq_hz) / params.ref_freq_hz)
    out = fspl_1m + slope * np.log10(d) + shadow_db
    return float(out) if np.ndim(out) == 0 else out


def assemble_channel(paths: Sequence[PropagationPath], geom: UpaGeometry) -> np.ndarray:
    """Row-vector channel ``H`` of shape ``(1, N_T)`` for a single-antenna receiver."""
    if len(paths) == 0:
        raise ValueError("no propagation paths")
    kappa = len(paths)
    h = np.zeros(geom.n_elements, dtype=complex)
    for p in paths:
        # omni receiver: a_r = 1
        h += p.gain * np.conj(array_response(p.aod_azimuth_rad, p.aod_elevation_rad, geom))
    return (np.sqrt(geom.n_elements / kappa) * h)[None, :]


def noise_power_w(bandwidth_hz: float, noise_figure_db: float = 7.0) -> float:
    return dbm_to_w(THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(bandwidth_hz) + noise_figure_db)


def dbm_to_w(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def beam_gains(channels: np.ndarray, assignment, beams: np.ndarray) -> np.ndarray:
    """Received power gains ``|H_{i, A[j]} f_j|^2`` for every (UE i, beam j).

    ``channels`` has shape ``(N_UE, N_BS, N_T)`` (row vectors), ``beams`` has
    shape ``(N_UE, N_T)`` where row ``j`` is the codeword sent to UE ``j`` by
    its serving BS ``assignment[j]``.
    """
    assignment = np.asarray(assignment, dtype=int)
    h = channels[:, assignment, :]  # (UE i, beam j, N_T)
    return np.abs(np.einsum("ijt,jt->ij", h, beams)) ** 2


def sinr_vector(channels, assignment, beams, ptx_w, noise_w: float) -> np.ndarray:
    """Per-UE SINR with one beam per served UE.

    Every beam not aimed at UE ``i`` interferes at UE ``i``, including other
    beams from UE ``i``'s own serving BS. BSs serving nobody transmit nothing.
    ``ptx_w`` is a scalar or a per-BS array.
    """
    if noise_w <= 0:
        raise ValueError("non-positive noise power")
    channels = np.asarray(channels)
    assignment = np.asarray(assignment, dtype=int)
    n_bs = channels.shape[1]
    if np.any(assignment < 0) or np.any(assignment >= n_bs):
        raise ValueError(f"BS index out of range [0, {n_bs})")
    ptx = np.broadcast_to(np.asarray(ptx_w, dtype=float), (n_bs,))[assignment]
    rx = beam_gains(channels, assignment, np.asarray(beams)) * ptx[None, :]
    signal = np.diag(rx).copy()
    interference = rx.sum(axis=1) - signal
    return signal / (interference + noise_w)


def mean_rate(sinrs) -> float:
    """Mean Shannon rate in bits/s/Hz over UEs."""
    return float(np.mean(np.log2(1.0 + np.asarray(sinrs, dtype=float))))
