"""Tapped-delay-line block fading and SNR-calibrated AWGN.

Five channel kinds: ideal (AWGN only), static (flat unit-magnitude tap
with random phase), Rayleigh, Rician (LOS confined to tap 0) and
Nakagami-m. Fading kinds use 4- or 6-tap power profiles taken from the
ITU-R M.1225 Pedestrian-A and Vehicular-A delay profiles, renormalized to
unit total power and placed at consecutive sample indices. Taps are frozen
for the duration of a record (block fading).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignalError
from .modem import Waveform, mean_power

CHANNEL_KINDS = ("ideal", "static", "rayleigh", "rician", "nakagami")
FADING_KINDS = ("rayleigh", "rician", "nakagami")

# Relative tap powers in dB; ITU-R M.1225 Pedestrian-A / Vehicular-A.
_PROFILE_DB = {
    4: (0.0, -9.7, -19.2, -22.8),
    6: (0.0, -1.0, -9.0, -10.0, -15.0, -20.0),
}


@dataclass(frozen=True)
class ChannelSpec:
    """Channel draw parameters; `seed` makes the draw reproducible."""

    kind: str
    rician_k: float = 3.0
    nakagami_m: float = 2.0
    n_taps: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.rician_k <= 0:
            raise ValueError(f"rician_k must be > 0, got {self.rician_k}")
        if self.nakagami_m < 0.5:
            raise ValueError(f"nakagami_m must be >= 0.5, got {self.nakagami_m}")
        if self.kind in FADING_KINDS and self.n_taps not in (4, 6):
            raise ValueError(f"n_taps must be 4 or 6, got {self.n_taps}")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Drawn complex taps plus the mean-power profile they came from."""

    taps: np.ndarray
    profile_powers: np.ndarray
    kind: str
    seed: int


def profile_for(n_taps: int) -> np.ndarray:
    """Normalized linear tap powers (sum 1) for a 4- or 6-tap profile."""
    if n_taps not in _PROFILE_DB:
        raise ValueError(f"no delay profile for {n_taps} taps (use 4 or 6)")
    linear = 10.0 ** (np.asarray(_PROFILE_DB[n_taps]) / 10.0)
    return linear / linear.sum()


def draw_channel(spec: ChannelSpec) -> ChannelRealization:
    """Draw one block-fading realization, deterministic per (spec, seed)."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "ideal":
        taps = np.array([1.0 + 0.0j])
        powers = np.array([1.0])
    elif spec.kind == "static":
        phase = rng.uniform(0.0, 2.0 * np.pi)
        taps = np.array([np.exp(1j * phase)])
        powers = np.array([1.0])
    else:
        powers = profile_for(spec.n_taps)
        if spec.kind == "rayleigh":
            g = rng.standard_normal((2, spec.n_taps))
            taps = np.sqrt(powers / 2.0) * (g[0] + 1j * g[1])
        elif spec.kind == "rician":
            k = spec.rician_k
            los_phase = rng.uniform(0.0, 2.0 * np.pi)
            g = rng.standard_normal((2, spec.n_taps))
            taps = np.sqrt(powers / 2.0) * (g[0] + 1j * g[1])
            # Tap 0: deterministic-phase LOS plus diffuse part, power ratio k.
            taps[0] = (np.sqrt(powers[0] * k / (k + 1.0)) * np.exp(1j * los_phase)
                       + np.sqrt(powers[0] / (k + 1.0) / 2.0) * (g[0, 0] + 1j * g[1, 0]))
        else:  # nakagami
            m = spec.nakagami_m
            gain = rng.gamma(m, powers / m)
            phase = rng.uniform(0.0, 2.0 * np.pi, size=spec.n_taps)
            taps = np.sqrt(gain) * np.exp(1j * phase)
    return ChannelRealization(taps=taps, profile_powers=powers,
                              kind=spec.kind, seed=spec.seed)


def apply_channel(waveform: Waveform, realization: ChannelRealization) -> Waveform:
    """Linear convolution with the taps, truncated to the input length."""
    taps = realization.taps
    if taps.size == 0:
        raise ValueError("channel realization has no taps")
    x = waveform.samples
    if x.size < taps.size:
        raise ValueError(
            f"waveform ({x.size} samples) shorter than channel ({taps.size} taps)")
    return Waveform(np.convolve(x, taps)[:x.size])


def add_awgn(waveform: Waveform, snr_db: float, seed: int) -> Waveform:
    """Complex AWGN calibrated against the measured input power.

    snr_db = +inf is the noiseless sentinel and returns the input unchanged.
    """
    if np.isposinf(snr_db):
        return Waveform(waveform.samples.copy())
    x = waveform.samples
    p_rx = mean_power(x)
    if p_rx < 1e-30:
        raise DegenerateSignalError("cannot calibrate noise on a zero-power signal")
    sigma2 = p_rx / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((2, x.size))
    noise = np.sqrt(sigma2 / 2.0) * (g[0] + 1j * g[1])
    return Waveform(x + noise)
