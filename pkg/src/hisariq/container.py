"""HisarIQ binary container for labeled I/Q records.

Layout (all integers little-endian):

    magic  "HIQ1"          4 bytes
    format version         u16
    record count           u64
    samples per record     u32
    then per record:
        modulation id      u16
        family id          u8
        channel kind id    u8
        snr (dB)           i16
        reserved           u16  (zero)
        seed               u64
        samples            float32 x (2 * samples_per_record), interleaved I,Q

A sidecar manifest (UTF-8 ``key=value`` lines) carries the generation
config, its hash and split membership files; see :mod:`hisariq.dataset`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContainerFormatError
from .modem import VARIANTS, family_of

MAGIC = b"HIQ1"
VERSION = 1
_HEADER = struct.Struct("<4sHQI")

FAMILY_IDS = {"analog": 0, "fsk": 1, "pam": 2, "psk": 3, "qam": 4}
FAMILY_NAMES = {v: k for k, v in FAMILY_IDS.items()}

CHANNEL_IDS = {"ideal": 0, "static": 1, "rayleigh": 2, "rician": 3,
               "nakagami": 4, "unknown-upstream": 255}
CHANNEL_NAMES = {v: k for k, v in CHANNEL_IDS.items()}

# Wire ids: native catalog variants occupy 0..25 in catalog order; the ten
# upstream RadioML2016.10a class names occupy 32..41.
RADIOML_CLASSES = ("AM-DSB", "WBFM", "GFSK", "CPFSK", "4-PAM",
                   "BPSK", "QPSK", "8-PSK", "16-QAM", "64-QAM")
RADIOML_ID_BASE = 32
RADIOML_FAMILIES = {"AM-DSB": "analog", "WBFM": "analog", "GFSK": "fsk",
                    "CPFSK": "fsk", "4-PAM": "pam", "BPSK": "psk",
                    "QPSK": "psk", "8-PSK": "psk", "16-QAM": "qam",
                    "64-QAM": "qam"}

MODULATION_IDS = {name: i for i, name in enumerate(VARIANTS)}
MODULATION_IDS.update(
    {name: RADIOML_ID_BASE + i for i, name in enumerate(RADIOML_CLASSES)})
MODULATION_NAMES = {}
for _name, _mid in MODULATION_IDS.items():
    MODULATION_NAMES.setdefault(_mid, _name)


def modulation_family(name: str) -> str:
    """Family of a native catalog variant or upstream RadioML class."""
    if name in RADIOML_FAMILIES and name not in VARIANTS:
        return RADIOML_FAMILIES[name]
    return family_of(name)


@dataclass(frozen=True, eq=False)
class IQRecord:
    """One labeled signal: complex64 samples plus generation metadata."""

    samples: np.ndarray
    modulation: str
    family: str
    snr_db: int
    channel_kind: str
    seed: int


def _record_dtype(samples_per_record: int) -> np.dtype:
    return np.dtype([
        ("modulation", "<u2"),
        ("family", "u1"),
        ("channel", "u1"),
        ("snr", "<i2"),
        ("reserved", "<u2"),
        ("seed", "<u8"),
        ("iq", "<f4", (samples_per_record, 2)),
    ])


def _fill_row(row, record: IQRecord) -> None:
    row["modulation"] = MODULATION_IDS[record.modulation]
    row["family"] = FAMILY_IDS[record.family]
    row["channel"] = CHANNEL_IDS[record.channel_kind]
    row["snr"] = record.snr_db
    row["reserved"] = 0
    row["seed"] = record.seed
    samples = np.asarray(record.samples, dtype=np.complex64)
    row["iq"][:, 0] = samples.real
    row["iq"][:, 1] = samples.imag


class ContainerWriter:
    """Streaming writer; records must share one sample length."""

    def __init__(self, path, samples_per_record: int, record_count: int):
        self.path = path
        self.samples_per_record = samples_per_record
        self.record_count = record_count
        self._dtype = _record_dtype(samples_per_record)
        self._written = 0
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, record_count,
                                    samples_per_record))

    def write(self, record: IQRecord) -> None:
        if record.samples.size != self.samples_per_record:
            raise ValueError(
                f"record has {record.samples.size} samples, container expects "
                f"{self.samples_per_record}")
        row = np.zeros(1, dtype=self._dtype)
        _fill_row(row[0], record)
        self._fh.write(row.tobytes())
        self._written += 1

    def close(self) -> None:
        self._fh.close()
        if self._written != self.record_count:
            raise ContainerFormatError(
                f"wrote {self._written} records, header promised "
                f"{self.record_count}")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self._fh.close()


def save_container(records, path) -> None:
    """Write records to a HisarIQ file (bit-exact float32 samples)."""
    records = list(records)
    n = records[0].samples.size if records else 0
    with ContainerWriter(path, n, len(records)) as writer:
        for record in records:
            writer.write(record)


def _read_header(raw: bytes, path) -> tuple[int, int]:
    if len(raw) < _HEADER.size:
        raise ContainerFormatError(
            f"{path}: truncated header at offset {len(raw)}, "
            f"need {_HEADER.size} bytes")
    magic, version, count, spr = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ContainerFormatError(
            f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise ContainerFormatError(
            f"{path}: unsupported format version {version}, expected {VERSION}")
    return count, spr


def _read_rows(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        raw = fh.read()
    count, spr = _read_header(raw, path)
    dtype = _record_dtype(spr)
    expected = _HEADER.size + count * dtype.itemsize
    if len(raw) != expected:
        raise ContainerFormatError(
            f"{path}: file ends at offset {len(raw)}, expected {expected} "
            f"for {count} records")
    rows = np.frombuffer(raw, dtype=dtype, count=count, offset=_HEADER.size)
    return rows, spr


def _name_of(mid: int, path) -> str:
    try:
        return MODULATION_NAMES[int(mid)]
    except KeyError:
        raise ContainerFormatError(f"{path}: unknown modulation id {mid}")


def load_container(path) -> list[IQRecord]:
    """Read all records back; the samples round-trip bit-exactly."""
    rows, _ = _read_rows(path)
    records = []
    for row in rows:
        iq = row["iq"]
        samples = (iq[:, 0] + 1j * iq[:, 1]).astype(np.complex64)
        records.append(IQRecord(
            samples=samples,
            modulation=_name_of(row["modulation"], path),
            family=FAMILY_NAMES[int(row["family"])],
            snr_db=int(row["snr"]),
            channel_kind=CHANNEL_NAMES[int(row["channel"])],
            seed=int(row["seed"]),
        ))
    return records


def load_arrays(path):
    """Bulk columns for training: (iq (N,n,2) float32, metadata dict)."""
    rows, spr = _read_rows(path)
    meta = {
        "modulation_id": rows["modulation"].astype(np.int64),
        "family_id": rows["family"].astype(np.int64),
        "channel_id": rows["channel"].astype(np.int64),
        "snr_db": rows["snr"].astype(np.int64),
        "seed": rows["seed"].copy(),
        "samples_per_record": spr,
    }
    return rows["iq"].copy(), meta


def load_index(path):
    """Metadata only (no sample copies); used for census and splitting."""
    rows, spr = _read_rows(path)
    return {
        "modulation_id": rows["modulation"].astype(np.int64),
        "family_id": rows["family"].astype(np.int64),
        "channel_id": rows["channel"].astype(np.int64),
        "snr_db": rows["snr"].astype(np.int64),
        "samples_per_record": spr,
    }
