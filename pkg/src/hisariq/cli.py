"""Command-line entry point: generate, split, train, eval, classify, inspect.

Exit codes are a stable scripting contract: 0 success, 2 usage or config
errors, 3 I/O or parse errors, 4 training divergence, 5 geometry mismatch.

Heavy imports happen inside the handlers so that HISARIQ_THREADS (or
--threads) can cap BLAS worker threads before NumPy loads.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_TRAINING = 4
EXIT_GEOMETRY = 5


def _apply_thread_limit(threads: int | None) -> None:
    value = threads if threads is not None else os.environ.get("HISARIQ_THREADS")
    if value is None:
        return
    value = str(int(value))
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, value)


def _read_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _config_override(args, values: dict, casts: dict) -> None:
    """Fill argparse defaults from a key=value config file; flags win."""
    for key, raw in values.items():
        if key not in casts:
            raise ValueError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            setattr(args, key, casts[key](raw))


def _csv(text):
    return tuple(item.strip() for item in text.split(",") if item.strip())


def _int_csv(text):
    return tuple(int(item) for item in _csv(text))


def _ratio(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _file_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _print_census(data_path) -> None:
    from .dataset import census

    counts = census(data_path)
    mods = sorted({k[0] for k in counts})
    kinds = sorted({k[2] for k in counts})
    per_mod_kind = {}
    for (mod, _snr, kind), c in counts.items():
        per_mod_kind[(mod, kind)] = per_mod_kind.get((mod, kind), 0) + c
    width = max(len(m) for m in mods) + 2
    print("modulation".ljust(width) + "".join(k.rjust(18) for k in kinds)
          + "total".rjust(10))
    total = 0
    for mod in mods:
        row = [per_mod_kind.get((mod, kind), 0) for kind in kinds]
        total += sum(row)
        print(mod.ljust(width) + "".join(str(c).rjust(18) for c in row)
              + str(sum(row)).rjust(10))
    print("total records:", total)


def cmd_generate(args) -> int:
    from .dataset import (DESK_SIGNALS_PER_CELL, PAPER_SIGNALS_PER_CELL,
                          GenerationConfig, dataset_paths, generate_dataset)

    casts = {
        "signals_per_cell": int, "n_samples": int, "seed": int,
        "snr_grid": _int_csv, "modulations": _csv, "channels": _csv,
    }
    if args.config:
        _config_override(args, _read_config_file(args.config), casts)
    if args.seed is None:
        raise ValueError("generate requires --seed (or seed= in the config)")
    spc = args.signals_per_cell
    if spc is None:
        spc = PAPER_SIGNALS_PER_CELL if args.paper_scale else DESK_SIGNALS_PER_CELL
    kwargs = {}
    if args.n_samples is not None:
        kwargs["n_samples"] = args.n_samples
    if args.snr_grid is not None:
        kwargs["snr_grid"] = args.snr_grid
    if args.modulations is not None:
        kwargs["modulations"] = args.modulations
    if args.channels is not None:
        kwargs["channels"] = args.channels
    config = GenerationConfig(signals_per_cell=spc, master_seed=args.seed,
                              **kwargs)
    manifest = generate_dataset(config, args.out)
    data_path, _ = dataset_paths(args.out)
    _print_census(data_path)
    print(f"config_hash={manifest.config_hash}")
    return EXIT_OK


def cmd_split(args) -> int:
    from .dataset import split_dataset

    ratios = tuple(_ratio(r) for r in args.ratios.split(","))
    parts = split_dataset(args.dataset, ratios)
    for name, indices in parts.items():
        print(f"{name}: {indices.size} records")
    return EXIT_OK


def _load_dataset_arrays(dataset_dir, mode):
    import numpy as np

    from .container import (CHANNEL_IDS, MODULATION_NAMES, load_arrays)
    from .dataset import dataset_paths

    from .model import rms_normalize

    data_path, _ = dataset_paths(dataset_dir)
    iq, meta = load_arrays(data_path)
    x = rms_normalize(np.ascontiguousarray(iq.transpose(0, 2, 1)))
    snr = meta["snr_db"]
    native = not np.any(meta["channel_id"] == CHANNEL_IDS["unknown-upstream"])
    names = [MODULATION_NAMES[int(i)] for i in meta["modulation_id"]]
    return x, names, snr, native


def _labels_for(names, mode: str):
    import numpy as np

    from .model import label_mode

    mapping, class_names = label_mode(mode)
    try:
        y = np.array([mapping[n] for n in names], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(
            f"dataset contains modulation {exc} outside label mode {mode!r}")
    return y, class_names


def cmd_train(args) -> int:
    import numpy as np

    from .dataset import load_split
    from .model import (ModelConfig, TrainOptions, build_model, history_table,
                        train)

    casts = {
        "labels": str, "epochs": int, "batch": int, "lr": float,
        "patience": int, "min_delta": float, "dropout": float, "mode": str,
        "seed": int, "noise": str,
    }
    if args.config:
        _config_override(args, _read_config_file(args.config), casts)
    labels = args.labels or "family"
    mode = args.mode or "fast"
    x, names, snr, native = _load_dataset_arrays(args.dataset, mode)
    y, _ = _labels_for(names, labels)
    train_idx = load_split(args.dataset, "train")
    val_idx = load_split(args.dataset, "val")
    noise = {"auto": native, "on": True, "off": False}[args.noise or "auto"]
    config = ModelConfig(
        input_width=x.shape[2],
        n_classes=int(y.max()) + 1 if labels == "variant" else 5,
        dropout_rate=0.5 if args.dropout is None else args.dropout,
        noise_layer=noise, seed=args.seed or 0, mode=mode)
    if labels == "variant":
        config = ModelConfig(
            input_width=x.shape[2], n_classes=10,
            dropout_rate=config.dropout_rate, noise_layer=noise,
            seed=config.seed, mode=mode)
    model = build_model(config)
    options = TrainOptions(
        batch_size=args.batch or 256,
        max_epochs=args.epochs or 100,
        patience=5 if args.patience is None else args.patience,
        min_delta=1e-4 if args.min_delta is None else args.min_delta,
        lr=args.lr or 1e-4,
        seed=args.seed or 0)
    snr_arr = snr.astype(np.float64)
    state = train(
        model,
        (x[train_idx], y[train_idx], snr_arr[train_idx] if noise else None),
        (x[val_idx], y[val_idx], None),
        options)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.hiqw")
    model.save(ckpt)
    with open(os.path.join(args.out, "history.txt"), "w", encoding="utf-8") as fh:
        fh.write(history_table(state))
    print(f"best_val_loss={state.best_val_loss:.6g} "
          f"epoch={state.best_epoch}/{state.epochs_run}")
    print(f"checkpoint={ckpt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .dataset import dataset_paths, load_split
    from .errors import ShapeError
    from .model import evaluate, load_model, predict
    from .report import build_report, emit_report

    mode = args.mode or "fast"
    model = load_model(args.model, mode=mode)
    x, names, snr, _ = _load_dataset_arrays(args.dataset, mode)
    if x.shape[2] != model.config.input_width:
        raise ShapeError(
            f"checkpoint expects records of shape (2, {model.config.input_width}) "
            f"but dataset holds (2, {x.shape[2]})")
    labels = args.labels or ("variant" if model.config.n_classes == 10 else "family")
    y, class_names = _labels_for(names, labels)
    if len(class_names) != model.config.n_classes:
        raise ShapeError(
            f"label mode {labels!r} has {len(class_names)} classes but the "
            f"checkpoint outputs {model.config.n_classes}")
    if args.split:
        idx = load_split(args.dataset, args.split)
        x, y, snr = x[idx], y[idx], snr[idx]
    _, y_pred = predict(model, x, batch_size=args.batch or 64)
    data_path, _ = dataset_paths(args.dataset)
    rep = build_report(class_names, snr, y, y_pred, label_mode=labels,
                       dataset_hash=_file_hash(data_path),
                       checkpoint_hash=_file_hash(args.model))
    fmt = args.format or "text-table"
    acc_path = f"{args.report}_accuracy.txt"
    emit_report(rep, acc_path, fmt=fmt)
    print(f"overall_accuracy={rep.overall_accuracy()!r}")
    for snr_db, acc in rep.accuracy().items():
        print(f"snr {snr_db:+d} dB: accuracy {acc:.4f}")
    print(f"report={acc_path}")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .container import load_arrays
    from .errors import ShapeError
    from .model import load_model, predict

    model = load_model(args.model, mode=args.mode or "fast")
    iq, meta = load_arrays(args.input)
    import numpy as np

    from .model import rms_normalize

    x = rms_normalize(np.ascontiguousarray(iq.transpose(0, 2, 1)))
    if x.shape[2] != model.config.input_width:
        raise ShapeError(
            f"checkpoint expects (2, {model.config.input_width}) records, "
            f"input file holds (2, {x.shape[2]})")
    from .model import label_mode

    mode_name = "variant" if model.config.n_classes == 10 else "family"
    _, class_names = label_mode(mode_name)
    probs, labels = predict(model, x, batch_size=args.batch or 64)
    for i in range(x.shape[0]):
        cells = ",".join(repr(float(p)) for p in probs[i])
        print(f"{i},{class_names[labels[i]]},{cells}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    if args.rc_taps:
        from .modem import ShapingConfig, raised_cosine_taps

        shaping = ShapingConfig(
            oversampling=args.oversampling or 2,
            rolloff=0.35 if args.rolloff is None else args.rolloff,
            span=args.span or 8)
        for tap in raised_cosine_taps(shaping):
            print(f"{tap:.17g}")
        return EXIT_OK
    if not args.dataset:
        raise ValueError("inspect needs --dataset or --rc-taps")
    from .dataset import dataset_paths, load_manifest

    data_path, manifest_path = dataset_paths(args.dataset)
    manifest = load_manifest(manifest_path)
    print(manifest.to_text(), end="")
    _print_census(data_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hisariq",
        description="I/Q modulation dataset workbench and CNN classifier")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/OMP threads (default: HISARIQ_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a labeled dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", action="store_true", default=True)
    scale.add_argument("--paper-scale", action="store_true", default=False)
    p.add_argument("--signals-per-cell", dest="signals_per_cell", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--snr-grid", dest="snr_grid", type=_int_csv)
    p.add_argument("--modulations", type=_csv)
    p.add_argument("--channels", type=_csv)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("split", help="write stratified train/val/test splits")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ratios", default="8/15,2/15,5/15")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("train", help="train the classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--labels", choices=("family", "variant"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--min-delta", dest="min_delta", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--noise", choices=("auto", "on", "off"))
    p.add_argument("--mode", choices=("reference", "fast"))
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="accuracy-vs-SNR and confusion reports")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--labels", choices=("family", "variant"))
    p.add_argument("--format", choices=("text-table", "structured-text"))
    p.add_argument("--batch", type=int)
    p.add_argument("--mode", choices=("reference", "fast"))
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("classify", help="label records from a container file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--batch", type=int)
    p.add_argument("--mode", choices=("reference", "fast"))
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("inspect", help="print manifest/census or filter taps")
    p.add_argument("--dataset", default=None)
    p.add_argument("--rc-taps", action="store_true")
    p.add_argument("--oversampling", type=int)
    p.add_argument("--rolloff", type=float)
    p.add_argument("--span", type=int)
    p.set_defaults(handler=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_thread_limit(args.threads)
    from .errors import (ContainerFormatError, ShapeError,
                         StratificationError, TrainingDivergedError)

    try:
        return args.handler(args)
    except ShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (OSError, ContainerFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, StratificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
