"""Baseband waveform synthesis for the 26-variant modulation catalog.

Five families are covered: analog (AM/FM/PM variants), FSK, PAM, PSK and
QAM. Linear digital families are Gray-mapped onto unit-energy
constellations and pulse-shaped with a raised-cosine filter; FSK is a
continuous-phase tone switcher; analog variants use the standard complex
envelope models. Every emitted waveform is normalized to unit mean power.

All sample rates are normalized: fs = 1, so frequencies below are cycles
per sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import hilbert

from .errors import DegenerateSignalError, WrongFamilyError

FAMILIES = ("analog", "fsk", "pam", "psk", "qam")

# Canonical catalog order; also the wire order used by the container format.
_VARIANT_TABLE = (
    ("AM-DSB", "analog", 1),
    ("AM-SC", "analog", 1),
    ("AM-USB", "analog", 1),
    ("AM-LSB", "analog", 1),
    ("FM", "analog", 1),
    ("PM", "analog", 1),
    ("2-FSK", "fsk", 2),
    ("4-FSK", "fsk", 4),
    ("8-FSK", "fsk", 8),
    ("16-FSK", "fsk", 16),
    ("4-PAM", "pam", 4),
    ("8-PAM", "pam", 8),
    ("16-PAM", "pam", 16),
    ("BPSK", "psk", 2),
    ("QPSK", "psk", 4),
    ("8-PSK", "psk", 8),
    ("16-PSK", "psk", 16),
    ("32-PSK", "psk", 32),
    ("64-PSK", "psk", 64),
    ("4-QAM", "qam", 4),
    ("8-QAM", "qam", 8),
    ("16-QAM", "qam", 16),
    ("32-QAM", "qam", 32),
    ("64-QAM", "qam", 64),
    ("128-QAM", "qam", 128),
    ("256-QAM", "qam", 256),
)

VARIANTS = tuple(name for name, _, _ in _VARIANT_TABLE)

# Analog model constants: AM depth, FM deviation (fraction of fs) and PM index.
AM_DEPTH = 0.5
FM_DEVIATION = 0.1
PM_INDEX = np.pi / 2
MESSAGE_BANDWIDTH = 0.125  # |f| <= fs/8

_LINEAR_FAMILIES = ("pam", "psk", "qam")


@dataclass(frozen=True)
class ModulationSpec:
    """One catalog entry: family, variant name, order M, bits per symbol."""

    family: str
    variant: str
    order: int
    bits_per_symbol: int


@lru_cache(maxsize=None)
def spec_for(variant: str) -> ModulationSpec:
    """Look up the ModulationSpec for a catalog variant name.

    Raises ValueError for anything outside the 26-entry catalog.
    """
    for name, family, order in _VARIANT_TABLE:
        if name == variant:
            bps = order.bit_length() - 1 if order > 1 else 0
            return ModulationSpec(family=family, variant=name, order=order,
                                  bits_per_symbol=bps)
    raise ValueError(f"unknown modulation variant: {variant!r}")


def family_of(variant: str) -> str:
    """Family name ('analog', 'fsk', 'pam', 'psk' or 'qam') of a variant."""
    return spec_for(variant).family


@dataclass(frozen=True)
class ShapingConfig:
    """Raised-cosine pulse shaping parameters."""

    oversampling: int = 2
    rolloff: float = 0.35
    span: int = 8

    def __post_init__(self):
        if self.oversampling < 2:
            raise ValueError(f"oversampling must be >= 2, got {self.oversampling}")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"rolloff must be in [0, 1], got {self.rolloff}")
        if self.span < 1:
            raise ValueError(f"span must be >= 1, got {self.span}")


@dataclass(frozen=True, eq=False)
class Waveform:
    """A complex baseband record; samples are I/Q pairs at fs = 1."""

    samples: np.ndarray

    @property
    def sample_count(self) -> int:
        return int(self.samples.size)


def mean_power(x: np.ndarray) -> float:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return float(np.mean(x.real * x.real + x.imag * x.imag))
    return float(np.mean(x * x))


def normalize_power(waveform: Waveform) -> Waveform:
    """Rescale so the mean of |x|^2 is exactly 1 (up to rounding)."""
    p = mean_power(waveform.samples)
    if p < 1e-30:
        raise DegenerateSignalError("cannot normalize a zero-power signal")
    return Waveform(waveform.samples / np.sqrt(p))


def generate_bits(count: int, seed: int) -> np.ndarray:
    """Reproducible i.i.d. uniform bits (uint8 values in {0, 1})."""
    if count <= 0:
        raise ValueError(f"bit count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=count, dtype=np.uint8)


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _cross_qam_points(order: int) -> np.ndarray:
    """Unnormalized cross/rectangular QAM grids for orders 8, 32 and 128."""
    if order == 8:
        xs, ys = (-3, -1, 1, 3), (1, -1)
        pts = [complex(x, y) for y in ys for x in xs]
    elif order == 32:
        axis = (-5, -3, -1, 1, 3, 5)
        pts = [complex(x, y) for y in reversed(axis) for x in axis
               if not (abs(x) == 5 and abs(y) == 5)]
    elif order == 128:
        axis = tuple(range(-11, 12, 2))
        pts = [complex(x, y) for y in reversed(axis) for x in axis
               if not (abs(x) >= 9 and abs(y) >= 9)]
    else:
        raise ValueError(f"no cross constellation for order {order}")
    return np.array(pts, dtype=np.complex128)


@lru_cache(maxsize=None)
def _constellation_cached(variant: str) -> np.ndarray:
    spec = spec_for(variant)
    m = spec.order
    if spec.family == "psk":
        pts = np.zeros(m, dtype=np.complex128)
        for k in range(m):
            pts[_gray(k)] = np.exp(2j * np.pi * k / m)
        return pts
    if spec.family == "pam":
        pts = np.zeros(m, dtype=np.complex128)
        scale = np.sqrt(3.0 / (m * m - 1))
        for k in range(m):
            pts[_gray(k)] = (m - 1 - 2 * k) * scale
        return pts
    if spec.family == "qam":
        side = int(round(np.sqrt(m)))
        if side * side == m:
            # Square grid, independent Gray code per axis.
            half = spec.bits_per_symbol // 2
            scale = np.sqrt(3.0 / (2 * (side * side - 1)))
            pts = np.zeros(m, dtype=np.complex128)
            for ki in range(side):
                for kq in range(side):
                    label = (_gray(ki) << half) | _gray(kq)
                    pts[label] = ((side - 1 - 2 * ki)
                                  + 1j * (side - 1 - 2 * kq)) * scale
            return pts
        raw = _cross_qam_points(m)
        return raw / np.sqrt(mean_power(raw))
    raise WrongFamilyError(f"{variant} has no point constellation")


def constellation(spec: ModulationSpec) -> np.ndarray:
    """Unit-energy constellation indexed by bit label (0..M-1)."""
    if spec.family not in _LINEAR_FAMILIES:
        raise WrongFamilyError(
            f"constellations exist only for PAM/PSK/QAM, got {spec.family}")
    return _constellation_cached(spec.variant)


def _pack_bits(bits: np.ndarray, bps: int) -> np.ndarray:
    groups = bits.reshape(-1, bps).astype(np.int64)
    weights = 1 << np.arange(bps - 1, -1, -1, dtype=np.int64)
    return groups @ weights


def _unpack_bits(values: np.ndarray, bps: int) -> np.ndarray:
    shifts = np.arange(bps - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def map_symbols(bits: np.ndarray, spec: ModulationSpec) -> np.ndarray:
    """Map a bit vector onto Gray-coded unit-energy constellation points."""
    if spec.family not in _LINEAR_FAMILIES:
        raise WrongFamilyError(
            f"map_symbols requires a PAM/PSK/QAM spec, got {spec.family}")
    bits = np.asarray(bits)
    if bits.size == 0 or bits.size % spec.bits_per_symbol != 0:
        raise ValueError(
            f"bit count {bits.size} not a positive multiple of "
            f"{spec.bits_per_symbol} ({spec.variant})")
    return constellation(spec)[_pack_bits(bits, spec.bits_per_symbol)]


def demap_symbols(symbols: np.ndarray, spec: ModulationSpec) -> np.ndarray:
    """Minimum-distance decisions back to bits.

    Ties go to the lowest constellation index (argmin over bit labels).
    """
    if spec.family not in _LINEAR_FAMILIES:
        raise WrongFamilyError(
            f"demap_symbols requires a PAM/PSK/QAM spec, got {spec.family}")
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.size == 0:
        raise ValueError("cannot demap an empty symbol vector")
    points = constellation(spec)
    d = np.abs(symbols[:, None] - points[None, :])
    labels = np.argmin(d, axis=1)
    return _unpack_bits(labels, spec.bits_per_symbol)


def raised_cosine_taps(shaping: ShapingConfig) -> np.ndarray:
    """Symmetric odd-length raised-cosine impulse response, unit peak.

    Taps are sampled at `oversampling` points per symbol over
    [-span, +span] symbols. With rolloff 0 this reduces to a sinc kernel.
    """
    sps = shaping.oversampling
    beta = shaping.rolloff
    n = np.arange(-shaping.span * sps, shaping.span * sps + 1)
    t = n / sps
    denom = 1.0 - (2.0 * beta * t) ** 2
    taps = np.empty_like(t, dtype=np.float64)
    regular = np.abs(denom) > 1e-10
    taps[regular] = (np.sinc(t[regular]) * np.cos(np.pi * beta * t[regular])
                     / denom[regular])
    if beta > 0.0 and not regular.all():
        # L'Hopital limit at |t| = 1/(2 beta).
        taps[~regular] = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta))
    return taps


def symbols_required(shaping: ShapingConfig, n_samples: int) -> int:
    """Symbols needed so the steady-state filter output fills n_samples."""
    return -(-n_samples // shaping.oversampling) + 2 * shaping.span


def bits_required(spec: ModulationSpec, shaping: ShapingConfig,
                  n_samples: int) -> int:
    if spec.family == "fsk":
        return -(-n_samples // shaping.oversampling) * spec.bits_per_symbol
    return symbols_required(shaping, n_samples) * spec.bits_per_symbol


def modulate_linear(bits: np.ndarray, spec: ModulationSpec,
                    shaping: ShapingConfig, n_samples: int) -> Waveform:
    """Pulse-shaped PAM/PSK/QAM waveform of exactly n_samples samples.

    The symbol stream is long enough that the emitted window contains only
    filter steady state; the first recoverable symbol is symbol `span`.
    """
    if spec.family not in _LINEAR_FAMILIES:
        raise WrongFamilyError(
            f"modulate_linear requires PAM/PSK/QAM, got {spec.family}")
    if n_samples <= 0:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    bits = np.asarray(bits)
    n_sym = symbols_required(shaping, n_samples)
    need = n_sym * spec.bits_per_symbol
    if bits.size < need:
        raise ValueError(
            f"need at least {need} bits for {n_samples} samples of "
            f"{spec.variant}, got {bits.size}")
    extra = bits.size % spec.bits_per_symbol
    if extra:
        raise ValueError(
            f"bit count {bits.size} not a multiple of {spec.bits_per_symbol}")
    symbols = map_symbols(bits[:need], spec)
    sps = shaping.oversampling
    upsampled = np.zeros(n_sym * sps, dtype=np.complex128)
    upsampled[::sps] = symbols
    shaped = np.convolve(upsampled, raised_cosine_taps(shaping))
    start = 2 * shaping.span * sps
    window = shaped[start:start + n_samples]
    if window.size < n_samples:
        window = np.pad(window, (0, n_samples - window.size))
    return normalize_power(Waveform(window))


def fsk_tone_frequencies(order: int) -> np.ndarray:
    """Tone grid (2k - M + 1) * fs / (4M); all tones inside [-fs/4, fs/4]."""
    k = np.arange(order)
    return (2 * k - order + 1) / (4.0 * order)


def modulate_fsk(bits: np.ndarray, spec: ModulationSpec,
                 shaping: ShapingConfig, n_samples: int) -> Waveform:
    """Continuous-phase FSK: one of M tones per symbol, no phase jumps."""
    if spec.family != "fsk":
        raise WrongFamilyError(f"modulate_fsk requires FSK, got {spec.family}")
    if n_samples <= 0:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    bits = np.asarray(bits)
    sps = shaping.oversampling
    n_sym = -(-n_samples // sps)
    need = n_sym * spec.bits_per_symbol
    if bits.size < need or bits.size % spec.bits_per_symbol:
        raise ValueError(
            f"need a multiple of {spec.bits_per_symbol} bits, at least "
            f"{need}, got {bits.size}")
    labels = _pack_bits(bits[:need], spec.bits_per_symbol)
    gray_to_tone = np.zeros(spec.order, dtype=np.int64)
    for k in range(spec.order):
        gray_to_tone[_gray(k)] = k
    tones = fsk_tone_frequencies(spec.order)[gray_to_tone[labels]]
    increments = np.repeat(2.0 * np.pi * tones, sps)[:n_samples - 1]
    phase = np.concatenate(([0.0], np.cumsum(increments)))
    return normalize_power(Waveform(np.exp(1j * phase)))


def make_message(n_samples: int, seed: int) -> np.ndarray:
    """Low-pass Gaussian message (bandwidth fs/8), exactly standardized."""
    if n_samples <= 0:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    if n_samples == 1:
        return np.zeros(1)
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(n_samples)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n_samples)
    spectrum[freqs > MESSAGE_BANDWIDTH] = 0.0
    msg = np.fft.irfft(spectrum, n_samples)
    msg -= msg.mean()
    std = msg.std()
    if std < 1e-30:
        raise DegenerateSignalError("message degenerated to a constant")
    return msg / std


def modulate_analog(message: np.ndarray, variant: str,
                    n_samples: int) -> Waveform:
    """Analog complex envelopes: AM-DSB/SC/USB/LSB, FM and PM."""
    spec = spec_for(variant)
    if spec.family != "analog":
        raise WrongFamilyError(f"{variant} is not an analog variant")
    message = np.asarray(message, dtype=np.float64)
    if message.size < n_samples:
        raise ValueError(
            f"message has {message.size} samples, need {n_samples}")
    m = message[:n_samples]
    if variant == "AM-DSB":
        x = 1.0 + AM_DEPTH * m + 0j
    elif variant == "AM-SC":
        x = m + 0j
    elif variant in ("AM-USB", "AM-LSB"):
        analytic = hilbert(m)  # m + j * H[m]
        x = analytic if variant == "AM-USB" else np.conj(analytic)
    elif variant == "FM":
        x = np.exp(2j * np.pi * FM_DEVIATION * np.cumsum(m))
    elif variant == "PM":
        x = np.exp(1j * PM_INDEX * m)
    else:  # pragma: no cover - table is exhaustive
        raise ValueError(f"unhandled analog variant {variant}")
    return normalize_power(Waveform(x))


def modulate(bits_or_message: np.ndarray, spec: ModulationSpec,
             shaping: ShapingConfig, n_samples: int) -> Waveform:
    """Family dispatch used by the dataset generator."""
    if spec.family == "analog":
        return modulate_analog(bits_or_message, spec.variant, n_samples)
    if spec.family == "fsk":
        return modulate_fsk(bits_or_message, spec, shaping, n_samples)
    return modulate_linear(bits_or_message, spec, shaping, n_samples)


def recover_symbols(waveform: Waveform, shaping: ShapingConfig) -> np.ndarray:
    """Symbol-instant samples of a shaped waveform, rescaled to unit energy.

    The raised cosine is a Nyquist pulse, so noiseless decisions at symbol
    instants are ISI-free; sample m corresponds to sent symbol m + span.
    """
    sps = shaping.oversampling
    y = waveform.samples[::sps]
    p = mean_power(y)
    if p < 1e-30:
        raise DegenerateSignalError("no symbol energy to recover")
    return y / np.sqrt(p)


def demodulate_linear(waveform: Waveform, spec: ModulationSpec,
                      shaping: ShapingConfig) -> np.ndarray:
    """Recover bits from a noiseless shaped waveform.

    Returns the bits of the symbols visible in the window, i.e. sent
    symbols span .. span + n_window - 1.
    """
    return demap_symbols(recover_symbols(waveform, shaping), spec)


def demodulate_fsk(waveform: Waveform, spec: ModulationSpec,
                   shaping: ShapingConfig) -> np.ndarray:
    """Per-symbol frequency estimates snapped to the nearest tone."""
    if spec.family != "fsk":
        raise WrongFamilyError(f"demodulate_fsk requires FSK, got {spec.family}")
    sps = shaping.oversampling
    x = waveform.samples
    n_sym = x.size // sps
    inc = np.angle(x[1:] * np.conj(x[:-1]))
    # Within-symbol increments only: positions i*sps .. i*sps + sps - 2.
    per_symbol = inc[:n_sym * sps - 1].copy()
    est = np.empty(n_sym)
    for i in range(n_sym):
        est[i] = per_symbol[i * sps:i * sps + sps - 1].mean()
    freqs = est / (2.0 * np.pi)
    tones = fsk_tone_frequencies(spec.order)
    tone_idx = np.argmin(np.abs(freqs[:, None] - tones[None, :]), axis=1)
    labels = np.array([_gray(int(k)) for k in tone_idx], dtype=np.int64)
    return _unpack_bits(labels, spec.bits_per_symbol)
