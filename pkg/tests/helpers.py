"""Shared builders for training-oriented tests."""

import numpy as np

from hisariq.channel import FADING_KINDS
from hisariq.dataset import (GenerationConfig, RecordPlan, record_seed,
                             stratified_allocation, synthesize_record)
from hisariq.modem import VARIANTS, family_of

FAMILY_ORDER = ("analog", "fsk", "pam", "psk", "qam")
HIGH_SNR_GRID = (6, 8, 10, 12, 14, 16, 18)
ALL_CHANNELS = ("ideal", "static", "rayleigh", "rician", "nakagami")


def family_balanced_records(per_family=300, n_samples=1024, master_seed=0,
                            snr_grid=HIGH_SNR_GRID, channels=ALL_CHANNELS):
    """Exactly per_family records per family, cycling variants/SNRs/channels.

    Returns (x, y, snr) with x shaped (N, 2, n_samples) float32 and y the
    family index. Record synthesis reuses the dataset pipeline seeds, so
    the output is deterministic per master_seed.
    """
    config = GenerationConfig(signals_per_cell=1, n_samples=n_samples,
                              snr_grid=tuple(snr_grid), channels=tuple(channels),
                              master_seed=master_seed)
    x = np.empty((per_family * len(FAMILY_ORDER), 2, n_samples), dtype=np.float32)
    y = np.empty(per_family * len(FAMILY_ORDER), dtype=np.int64)
    snr_out = np.empty_like(y)
    index = 0
    for fam_idx, family in enumerate(FAMILY_ORDER):
        variants = [v for v in VARIANTS if family_of(v) == family]
        combos = [(v, snr, ch) for v in variants for snr in snr_grid
                  for ch in channels]
        fading_count = 0
        for j in range(per_family):
            variant, snr, kind = combos[j % len(combos)]
            if kind in FADING_KINDS:
                n_taps = 4 if fading_count % 2 == 0 else 6
                fading_count += 1
            else:
                n_taps = 1
            plan = RecordPlan(index=index, modulation=variant, family=family,
                              snr_db=snr, channel_kind=kind, n_taps=n_taps,
                              seed=record_seed(master_seed, index))
            record = synthesize_record(plan, config)
            x[index, 0] = record.samples.real
            x[index, 1] = record.samples.imag
            y[index] = fam_idx
            snr_out[index] = snr
            index += 1
    return x, y, snr_out


def stratified_split_indices(y, snr, ratios, seed=0):
    """Disjoint exhaustive splits stratified per (label, snr) cell."""
    cells = {}
    for i, key in enumerate(zip(y.tolist(), snr.tolist())):
        cells.setdefault(key, []).append(i)
    keys = sorted(cells)
    allocation = stratified_allocation([len(cells[k]) for k in keys], ratios)
    rng = np.random.default_rng(seed)
    parts = [[] for _ in ratios]
    for key, counts in zip(keys, allocation):
        members = np.array(cells[key])
        rng.shuffle(members)
        start = 0
        for part, count in zip(parts, counts):
            part.extend(members[start:start + count].tolist())
            start += count
    return [np.array(sorted(p), dtype=np.int64) for p in parts]
