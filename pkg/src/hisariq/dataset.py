"""Dataset assembly: record plans, synthesis, manifests and splits.

A generation config spans the cube (modulation x SNR x channel kind) with
``signals_per_cell`` records per cell. Record seeds come from a splittable
hash of (master_seed, record index), so the output is independent of
generation order. Fading records alternate 4 and 6 taps within each cell.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import container as hiq
from .channel import FADING_KINDS, ChannelSpec, add_awgn, apply_channel, draw_channel
from .errors import StratificationError
from .modem import (ShapingConfig, VARIANTS, bits_required, family_of,
                    generate_bits, make_message, modulate, spec_for)

SNR_GRID = tuple(range(-20, 20, 2))  # 20 levels, -20 .. +18 dB
PAPER_SIGNALS_PER_CELL = 300
DESK_SIGNALS_PER_CELL = 2
_SPLIT_TAG = 0x53504C54  # distinguishes the split shuffle stream

DEFAULT_SPLIT_RATIOS = (8 / 15, 2 / 15, 5 / 15)
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class GenerationConfig:
    signals_per_cell: int = DESK_SIGNALS_PER_CELL
    n_samples: int = 1024
    snr_grid: tuple = SNR_GRID
    modulations: tuple = VARIANTS
    channels: tuple = ("ideal", "static", "rayleigh", "rician", "nakagami")
    master_seed: int = 0

    def __post_init__(self):
        if self.signals_per_cell < 1:
            raise ValueError("signals_per_cell must be >= 1")
        if self.n_samples < 16:
            raise ValueError("n_samples must be >= 16")
        for m in self.modulations:
            spec_for(m)
        for c in self.channels:
            if c not in hiq.CHANNEL_IDS or c == "unknown-upstream":
                raise ValueError(f"unknown channel kind {c!r}")
        if len(set(self.snr_grid)) != len(self.snr_grid):
            raise ValueError("snr_grid has duplicates")

    @property
    def record_count(self) -> int:
        return (len(self.modulations) * len(self.snr_grid)
                * len(self.channels) * self.signals_per_cell)

    def cells(self):
        for mod in self.modulations:
            for snr in self.snr_grid:
                for kind in self.channels:
                    yield mod, snr, kind

    def canonical(self) -> str:
        return "|".join([
            f"signals_per_cell={self.signals_per_cell}",
            f"n_samples={self.n_samples}",
            "snr_grid=" + ",".join(str(s) for s in self.snr_grid),
            "modulations=" + ",".join(self.modulations),
            "channels=" + ",".join(self.channels),
            f"master_seed={self.master_seed}",
        ])

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def paper_scale_config(master_seed: int = 0) -> GenerationConfig:
    return GenerationConfig(signals_per_cell=PAPER_SIGNALS_PER_CELL,
                            master_seed=master_seed)


@dataclass(frozen=True)
class RecordPlan:
    index: int
    modulation: str
    family: str
    snr_db: int
    channel_kind: str
    n_taps: int
    seed: int


def record_seed(master_seed: int, index: int) -> int:
    """Splittable per-record seed; independent of generation order."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def plan_records(config: GenerationConfig):
    """Yield the full deterministic record plan for a config."""
    index = 0
    for mod, snr, kind in config.cells():
        family = family_of(mod)
        for j in range(config.signals_per_cell):
            taps = (4 if j % 2 == 0 else 6) if kind in FADING_KINDS else 1
            yield RecordPlan(index=index, modulation=mod, family=family,
                             snr_db=snr, channel_kind=kind, n_taps=taps,
                             seed=record_seed(config.master_seed, index))
            index += 1


def plan_census(config: GenerationConfig) -> dict:
    """Exact per-(modulation, snr, channel) counts implied by the plan."""
    counts = {}
    for plan in plan_records(config):
        key = (plan.modulation, plan.snr_db, plan.channel_kind)
        counts[key] = counts.get(key, 0) + 1
    return counts


def _record_subseeds(plan: RecordPlan):
    """(source, channel, noise) seeds derived from the record seed."""
    return np.random.SeedSequence([plan.seed]).generate_state(3, np.uint64)


def synthesize_clean(plan: RecordPlan, config: GenerationConfig,
                     shaping: ShapingConfig | None = None):
    """The record's post-channel waveform before AWGN is applied."""
    shaping = shaping or ShapingConfig()
    spec = spec_for(plan.modulation)
    sub = _record_subseeds(plan)
    if spec.family == "analog":
        source = make_message(config.n_samples, int(sub[0]))
    else:
        source = generate_bits(
            bits_required(spec, shaping, config.n_samples), int(sub[0]))
    wave = modulate(source, spec, shaping, config.n_samples)
    realization = draw_channel(ChannelSpec(
        kind=plan.channel_kind, n_taps=plan.n_taps, seed=int(sub[1])))
    return apply_channel(wave, realization)


def synthesize_record(plan: RecordPlan, config: GenerationConfig,
                      shaping: ShapingConfig | None = None) -> hiq.IQRecord:
    """Modulate, fade and add noise for one planned record."""
    clean = synthesize_clean(plan, config, shaping)
    noisy = add_awgn(clean, plan.snr_db, int(_record_subseeds(plan)[2]))
    return hiq.IQRecord(samples=noisy.samples.astype(np.complex64),
                        modulation=plan.modulation, family=plan.family,
                        snr_db=plan.snr_db, channel_kind=plan.channel_kind,
                        seed=plan.seed)


@dataclass
class DatasetManifest:
    record_count: int
    samples_per_record: int
    master_seed: int
    signals_per_cell: int
    snr_grid: tuple
    modulations: tuple
    channels: tuple
    config_hash: str
    splits: dict = field(default_factory=dict)  # name -> idx filename

    def to_text(self) -> str:
        lines = [
            "format=hisariq-manifest",
            "version=1",
            f"record_count={self.record_count}",
            f"samples_per_record={self.samples_per_record}",
            f"master_seed={self.master_seed}",
            f"signals_per_cell={self.signals_per_cell}",
            "snr_grid=" + ",".join(str(s) for s in self.snr_grid),
            "modulations=" + ",".join(self.modulations),
            "channels=" + ",".join(self.channels),
            f"config_hash={self.config_hash}",
        ]
        for name in sorted(self.splits):
            lines.append(f"split.{name}={self.splits[name]}")
        return "\n".join(lines) + "\n"


def _manifest_from_kv(kv: dict) -> DatasetManifest:
    splits = {k.split(".", 1)[1]: v for k, v in kv.items()
              if k.startswith("split.")}
    return DatasetManifest(
        record_count=int(kv["record_count"]),
        samples_per_record=int(kv["samples_per_record"]),
        master_seed=int(kv["master_seed"]),
        signals_per_cell=int(kv["signals_per_cell"]),
        snr_grid=tuple(int(s) for s in kv["snr_grid"].split(",")),
        modulations=tuple(kv["modulations"].split(",")),
        channels=tuple(kv["channels"].split(",")),
        config_hash=kv["config_hash"],
        splits=splits,
    )


def save_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(manifest.to_text(), encoding="utf-8")


def load_manifest(path) -> DatasetManifest:
    kv = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and "=" in line:
            key, value = line.split("=", 1)
            kv[key] = value
    return _manifest_from_kv(kv)


def dataset_paths(out_dir):
    out = Path(out_dir)
    return out / "data.hiq", out / "manifest.txt"


def generate_dataset(config: GenerationConfig, out_dir,
                     progress=None) -> DatasetManifest:
    """Synthesize every planned record and write container + manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data_path, manifest_path = dataset_paths(out)
    shaping = ShapingConfig()
    with hiq.ContainerWriter(data_path, config.n_samples,
                             config.record_count) as writer:
        for plan in plan_records(config):
            writer.write(synthesize_record(plan, config, shaping))
            if progress is not None:
                progress(plan.index + 1, config.record_count)
    manifest = DatasetManifest(
        record_count=config.record_count,
        samples_per_record=config.n_samples,
        master_seed=config.master_seed,
        signals_per_cell=config.signals_per_cell,
        snr_grid=tuple(config.snr_grid),
        modulations=tuple(config.modulations),
        channels=tuple(config.channels),
        config_hash=config.config_hash(),
    )
    save_manifest(manifest, manifest_path)
    return manifest


def census(path) -> dict:
    """Counts per (modulation, snr, channel) actually present in a file."""
    meta = hiq.load_index(path)
    counts = {}
    for mid, snr, cid in zip(meta["modulation_id"], meta["snr_db"],
                             meta["channel_id"]):
        key = (hiq.MODULATION_NAMES[int(mid)], int(snr),
               hiq.CHANNEL_NAMES[int(cid)])
        counts[key] = counts.get(key, 0) + 1
    return counts


def stratified_allocation(cell_sizes, ratios) -> list:
    """Per-cell split counts: floor quotas plus largest-global-deficit top-up.

    Keeps every cell within +-1 record of its exact quota while making the
    global totals match the ratios as closely as integer counts allow.
    `cell_sizes` is an ordered list of cell record counts.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.ndim != 1 or ratios.size < 1 or (ratios < 0).any():
        raise StratificationError("ratios must be non-negative")
    if abs(ratios.sum() - 1.0) > 1e-9:
        raise StratificationError(f"ratios sum to {ratios.sum()}, expected 1")
    quota_acc = np.zeros(ratios.size)
    assigned_acc = np.zeros(ratios.size, dtype=np.int64)
    out = []
    for size in cell_sizes:
        if size < 1:
            raise StratificationError("cannot stratify an empty cell")
        quota = size * ratios
        counts = np.floor(quota).astype(np.int64)
        quota_acc += quota
        leftover = size - counts.sum()
        for _ in range(leftover):
            deficit = quota_acc - (assigned_acc + counts)
            deficit[ratios == 0.0] = -np.inf
            counts[int(np.argmax(deficit))] += 1
        assigned_acc += counts
        out.append(counts)
    return out


def split_dataset(out_dir, ratios=DEFAULT_SPLIT_RATIOS,
                  names=SPLIT_NAMES) -> dict:
    """Stratified disjoint splits over (modulation, snr, channel) cells.

    Writes one index file per split (one record index per line) next to the
    container and records them in the manifest. Deterministic per the
    manifest master seed.
    """
    data_path, manifest_path = dataset_paths(out_dir)
    manifest = load_manifest(manifest_path)
    meta = hiq.load_index(data_path)
    if len(ratios) != len(names):
        raise StratificationError("one ratio per split name required")
    n = meta["modulation_id"].size
    if n == 0:
        raise StratificationError("dataset is empty")
    keys = list(zip(meta["modulation_id"], meta["snr_db"], meta["channel_id"]))
    cells = {}
    for idx, key in enumerate(keys):
        cells.setdefault(key, []).append(idx)
    cell_keys = sorted(cells)
    rng = np.random.default_rng(
        np.random.SeedSequence([manifest.master_seed, _SPLIT_TAG]))
    allocation = stratified_allocation(
        [len(cells[k]) for k in cell_keys], ratios)
    parts = {name: [] for name in names}
    for key, counts in zip(cell_keys, allocation):
        members = np.array(cells[key])
        rng.shuffle(members)
        start = 0
        for name, c in zip(names, counts):
            parts[name].extend(members[start:start + c].tolist())
            start += c
    result = {}
    for name in names:
        indices = np.array(sorted(parts[name]), dtype=np.int64)
        filename = f"{name}.idx"
        with open(Path(out_dir) / filename, "w", encoding="utf-8") as fh:
            for i in indices:
                fh.write(f"{i}\n")
        manifest.splits[name] = filename
        result[name] = indices
    save_manifest(manifest, manifest_path)
    return result


def load_split(out_dir, name: str) -> np.ndarray:
    _, manifest_path = dataset_paths(out_dir)
    manifest = load_manifest(manifest_path)
    if name not in manifest.splits:
        raise StratificationError(
            f"dataset has no split {name!r}; run the split step first")
    path = Path(out_dir) / manifest.splits[name]
    text = path.read_text(encoding="utf-8").split()
    return np.array([int(t) for t in text], dtype=np.int64)
