"""
traveling_observer.loaders

Readers and writers for on-disk task data.

TOMD files hold one dense float matrix::

    b"TOMD"                   magic
    uint32 little-endian      sample count
    uint32 little-endian      variable count
    float32 little-endian     values, row-major, each in [0, 1]

A task directory holds ``meta.txt`` (``key = value`` lines), one CSV per
split, and optionally ``oracle.csv`` and ``manifest.csv`` (per-feature
minimum and maximum, checked on load).
"""
from __future__ import annotations
import logging
import math
import os
import struct
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import RunConfig, read_key_value_file
from .errors import ConfigError, FormatError
from .synthetic import (
    GpUniverseConfig,
    HypersphereUniverseConfig,
    generate_gp_universe,
    generate_hypersphere_universe,
)
from .tasks import SPLITS, Split, Task

logger = logging.getLogger(__name__)

TOMD_MAGIC = b"TOMD"
_TOMD_HEADER = struct.Struct("<4sII")

#: RGB weights of the grayscale conversion.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)
CIFAR_SIDE = 32
CIFAR_RECORD = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE
CIFAR_SIZES = (50_000, 10_000)

TEMPERATURE_WINDOW = 10

LABEL_COLUMN = "label"
META_FILE = "meta.txt"
ORACLE_FILE = "oracle.csv"
MANIFEST_FILE = "manifest.csv"
UNIVERSE_FILE = "tasks.txt"
FLOAT_FORMAT = "%.17g"


def write_tomd(path: str, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValueError(f"TOMD holds a 2-D matrix, got shape {values.shape}")
    with open(path, "wb") as handle:
        handle.write(_TOMD_HEADER.pack(TOMD_MAGIC, values.shape[0], values.shape[1]))
        handle.write(np.ascontiguousarray(values, dtype="<f4").tobytes(order="C"))


def read_tomd(path: str) -> np.ndarray:
    """
    Reads a TOMD file into a float64 matrix.  Any structural problem or
    value outside ``[0, 1]`` raises :class:`FormatError` carrying the
    byte offset.
    """
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < _TOMD_HEADER.size:
        raise FormatError("file shorter than the TOMD header", path, len(blob))
    magic, samples, variables = _TOMD_HEADER.unpack_from(blob, 0)
    if magic != TOMD_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {TOMD_MAGIC!r}", path, 0)
    expected = _TOMD_HEADER.size + 4 * samples * variables
    if len(blob) < expected:
        raise FormatError(
            f"truncated: header announces {samples}x{variables} values", path, len(blob)
        )
    if len(blob) > expected:
        raise FormatError(f"{len(blob) - expected} trailing bytes", path, expected)

    values = np.frombuffer(blob, dtype="<f4", offset=_TOMD_HEADER.size).reshape(samples, variables)
    bad = ~((values >= 0.0) & (values <= 1.0))
    if bad.any():
        index = int(np.flatnonzero(bad.ravel())[0])
        raise FormatError(
            f"value {values.ravel()[index]!r} outside [0, 1]", path, _TOMD_HEADER.size + 4 * index
        )
    return values.astype(np.float64)


def convert_cifar_batches(
        batch_files: Sequence[str],
        out_path: str,
        downsample: int = 1
) -> int:
    """
    Converts CIFAR-10 binary batches (one label byte and three 32x32
    colour planes per record) to a grayscale TOMD file.

    :param downsample: Average-pooling factor; 4 gives 8x8 images.
    :returns: The number of images written.
    """
    if downsample < 1 or CIFAR_SIDE % downsample:
        raise ValueError(f"downsample factor must divide {CIFAR_SIDE}, got {downsample}")
    images = []
    for batch_file in batch_files:
        with open(batch_file, "rb") as handle:
            blob = handle.read()
        if len(blob) % CIFAR_RECORD:
            whole = len(blob) - len(blob) % CIFAR_RECORD
            raise FormatError(f"partial record of {len(blob) - whole} bytes", batch_file, whole)
        records = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        planes = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE).astype(np.float64)
        gray = np.tensordot(np.asarray(GRAY_WEIGHTS), planes, axes=([0], [1])) / 255.0
        if downsample > 1:
            side = CIFAR_SIDE // downsample
            gray = gray.reshape(-1, side, downsample, side, downsample).mean(axis=(2, 4))
        images.append(gray.reshape(gray.shape[0], -1))

    values = np.clip(np.concatenate(images), 0.0, 1.0)
    write_tomd(out_path, values)
    logger.info("wrote %d grayscale images to %s", values.shape[0], out_path)
    return int(values.shape[0])


def pixel_name(row: int, col: int) -> str:
    return f"p{row}_{col}"


def load_cifar_gray(directory: str, expected_sizes: Optional[Tuple[int, int]] = None) -> Task:
    """
    Loads ``train.tomd`` and ``test.tomd`` from ``directory`` as one
    autoencoding task with a variable per pixel.  There is no validation
    split.
    """
    splits: Dict[str, Split] = {}
    width = None
    for k, name in enumerate(("train", "test")):
        path = os.path.join(directory, f"{name}.tomd")
        values = read_tomd(path)
        if width is not None and values.shape[1] != width:
            raise FormatError(f"{values.shape[1]} variables, train has {width}", path, 8)
        width = values.shape[1]
        if expected_sizes is not None and values.shape[0] != expected_sizes[k]:
            raise FormatError(
                f"{values.shape[0]} samples, expected {expected_sizes[k]}", path, 4
            )
        splits[name] = Split(inputs=values)

    side = math.isqrt(width)
    if side * side != width:
        raise FormatError(f"{width} variables do not form a square image",
                          os.path.join(directory, "train.tomd"), 8)
    names = [pixel_name(r, c) for r in range(side) for c in range(side)]
    oracle = {
        pixel_name(r, c): (float(r), float(c), float(side))
        for r in range(side) for c in range(side)
    }
    return Task(
        id="cifar",
        input_vars=names,
        output_vars=[],
        splits=splits,
        loss_kind="bce",
        metric="bce",
        autoencode=True,
        universe="cifar",
        oracle=oracle,
    )


def load_daily_temperature(path: str, window: int = TEMPERATURE_WINDOW) -> Task:
    """
    Builds sliding windows of ``window`` consecutive calendar days from a
    ``date,temperature`` CSV.  Windows entirely in the final year form the
    test split, those in the year before it the validation split, and
    earlier ones the training split.  Windows spanning a gap or a year
    boundary between splits are dropped.
    """
    frame = pd.read_csv(path)
    if frame.shape[1] < 2:
        raise FormatError("expected date and temperature columns", path, 1)
    dates = pd.to_datetime(frame.iloc[:, 0], errors="coerce")
    temps = pd.to_numeric(frame.iloc[:, 1], errors="coerce")
    valid = dates.notna() & temps.notna()
    if not valid.all():
        logger.warning("%s: skipping %d unreadable rows", path, int((~valid).sum()))
    series = (
        pd.DataFrame({"date": dates[valid].dt.normalize(), "temp": temps[valid]})
        .drop_duplicates("date", keep="first")
        .sort_values("date", kind="stable")
        .reset_index(drop=True)
    )
    if len(series) < window:
        raise FormatError(f"need at least {window} days, found {len(series)}", path)

    days = series["date"].to_numpy().astype("datetime64[D]")
    values = series["temp"].to_numpy(dtype=np.float64)
    years = series["date"].dt.year.to_numpy()
    starts = np.arange(len(series) - window + 1)
    ends = starts + window - 1
    contiguous = (days[ends] - days[starts]).astype(np.int64) == window - 1

    test_year = int(years.max())
    val_year = test_year - 1
    first, last = years[starts], years[ends]
    assignment = np.full(starts.shape, "", dtype=object)
    assignment[(first == test_year) & (last == test_year)] = "test"
    assignment[(first == val_year) & (last == val_year)] = "val"
    assignment[last < val_year] = "train"
    assignment[~contiguous] = ""

    windows = np.lib.stride_tricks.sliding_window_view(values, window)
    splits = {
        name: Split(inputs=windows[assignment == name])
        for name in SPLITS
    }
    dropped = int((assignment == "").sum())
    if dropped:
        logger.warning("%s: dropped %d windows with gaps or straddling a split", path, dropped)

    names = [f"day{d}" for d in range(1, window + 1)]
    return Task(
        id="temperature",
        input_vars=names,
        output_vars=[],
        splits=splits,
        loss_kind="mse",
        metric="rmse",
        autoencode=True,
        universe="temperature",
        oracle={name: (float(d),) for d, name in enumerate(names, start=1)},
        info={"dropped_windows": str(dropped), "days": str(len(series))},
    )


def write_task(task: Task, directory: str) -> None:
    """
    Writes ``task`` in the task-directory format.  Floats are written with
    17 significant digits so a reload is bit-exact.
    """
    os.makedirs(directory, exist_ok=True)
    present = [name for name in SPLITS if name in task.splits]
    meta = {
        "name": task.id,
        "n": str(task.n_inputs),
        "m": str(task.n_outputs),
        "universe": task.universe,
        "loss_kind": task.loss_kind,
        "metric": task.metric,
        "autoencode": "true" if task.autoencode else "false",
        "inputs": ",".join(task.input_vars),
        "outputs": ",".join(task.output_vars),
        "splits": ",".join(present),
    }
    with open(os.path.join(directory, META_FILE), "w", encoding="utf-8") as handle:
        handle.writelines(f"{key} = {value}\n" for key, value in meta.items())

    for name in present:
        split = task.splits[name]
        frame = pd.DataFrame(split.inputs, columns=task.input_vars)
        if task.is_classification:
            frame[LABEL_COLUMN] = split.labels
        elif task.n_outputs:
            for j, var in enumerate(task.output_vars):
                frame[var] = split.targets[:, j]
        frame.to_csv(os.path.join(directory, f"{name}.csv"), index=False,
                     float_format=FLOAT_FORMAT)

    if task.oracle:
        width = max(len(point) for point in task.oracle.values())
        rows = [
            [var] + list(task.oracle[var]) + [np.nan] * (width - len(task.oracle[var]))
            for var in task.input_vars + task.output_vars
            if var in task.oracle
        ]
        pd.DataFrame(rows, columns=["variable_name"] + [f"v{k}" for k in range(width)]).to_csv(
            os.path.join(directory, ORACLE_FILE), index=False, float_format=FLOAT_FORMAT
        )

    manifest = feature_ranges(task)
    manifest.to_csv(os.path.join(directory, MANIFEST_FILE), index=False,
                    float_format=FLOAT_FORMAT)


def feature_ranges(task: Task) -> pd.DataFrame:
    """
    Per input variable minimum and maximum over every split.
    """
    stacked = np.concatenate([split.inputs for split in task.splits.values()])
    return pd.DataFrame({
        "variable_name": task.input_vars,
        "min": stacked.min(axis=0),
        "max": stacked.max(axis=0),
    })


def _meta(directory: str) -> Dict[str, Tuple[str, int]]:
    path = os.path.join(directory, META_FILE)
    parsed = read_key_value_file(path)
    meta = parsed.get("", {})
    for key in ("name", "n", "m", "inputs"):
        if key not in meta:
            raise FormatError(f"missing key {key!r}", path)
    return meta


def _names(raw: str) -> List[str]:
    return [name.strip() for name in raw.split(",") if name.strip()]


def _read_split(
        path: str,
        input_vars: List[str],
        output_vars: List[str],
        classification: bool
) -> Split:
    frame = pd.read_csv(path, float_precision="round_trip")
    expected = input_vars + ([LABEL_COLUMN] if classification else output_vars)
    if list(frame.columns) != expected:
        raise FormatError(f"header {list(frame.columns)} does not match {expected}", path, 1)
    inputs = frame[input_vars].to_numpy(dtype=np.float64)
    if np.isnan(inputs).any():
        row = int(np.flatnonzero(np.isnan(inputs).any(axis=1))[0])
        raise FormatError("missing feature value", path, row + 2)
    if not classification:
        targets = frame[output_vars].to_numpy(dtype=np.float64) if output_vars else None
        return Split(inputs=inputs, targets=targets)

    labels = frame[LABEL_COLUMN].to_numpy(dtype=np.float64)
    bad = np.isnan(labels) | (labels != np.floor(labels)) | (labels < 0)
    bad |= labels >= len(output_vars)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise FormatError(
            f"label {labels[row]!r} is not a class index below {len(output_vars)}", path, row + 2
        )
    return Split(inputs=inputs, labels=labels.astype(np.int64))


def read_task(directory: str) -> Task:
    """
    Reads a task written by :func:`write_task`.
    """
    meta = _meta(directory)
    meta_path = os.path.join(directory, META_FILE)
    input_vars = _names(meta["inputs"][0])
    output_vars = _names(meta.get("outputs", ("", 0))[0])
    for key, names in (("n", input_vars), ("m", output_vars)):
        value, line = meta[key]
        if not value.isdigit() or int(value) != len(names):
            raise FormatError(f"{key} = {value} does not match {len(names)} names", meta_path, line)

    loss_kind = meta.get("loss_kind", ("squared_hinge", 0))[0]
    classification = loss_kind == "squared_hinge"
    split_names = _names(meta.get("splits", (",".join(SPLITS), 0))[0])
    splits = {
        name: _read_split(os.path.join(directory, f"{name}.csv"), input_vars, output_vars,
                          classification)
        for name in split_names
    }

    oracle = None
    oracle_path = os.path.join(directory, ORACLE_FILE)
    if os.path.exists(oracle_path):
        frame = pd.read_csv(oracle_path, float_precision="round_trip")
        oracle = {
            str(row[0]): tuple(float(v) for v in row[1:] if not pd.isna(v))
            for row in frame.itertuples(index=False)
        }

    task = Task(
        id=meta["name"][0],
        input_vars=input_vars,
        output_vars=output_vars,
        splits=splits,
        loss_kind=loss_kind,
        metric=meta.get("metric", ("accuracy", 0))[0],
        autoencode=meta.get("autoencode", ("false", 0))[0].lower() == "true",
        universe=meta.get("universe", ("tabular", 0))[0],
        oracle=oracle,
    )
    _check_manifest(task, os.path.join(directory, MANIFEST_FILE))
    return task


def _check_manifest(task: Task, path: str) -> None:
    if not os.path.exists(path):
        return
    held = pd.read_csv(path, float_precision="round_trip")
    actual = feature_ranges(task)
    if list(held["variable_name"]) != task.input_vars:
        raise FormatError("manifest variables do not match the task inputs", path, 1)
    for column in ("min", "max"):
        mismatch = held[column].to_numpy() != actual[column].to_numpy()
        if mismatch.any():
            row = int(np.flatnonzero(mismatch)[0])
            raise FormatError(
                f"{column} of {task.input_vars[row]} is {actual[column][row]!r}, "
                f"manifest says {held[column][row]!r}",
                path,
                row + 2,
            )


def load_tabular_task(directory: str) -> Task:
    """
    Reads a classification task: ``n`` feature columns become input
    variables and ``m`` classes become output variables.
    """
    task = read_task(directory)
    if not task.is_classification:
        raise FormatError(f"task {task.id} is not a classification task",
                          os.path.join(directory, META_FILE))
    return task


def write_universe(tasks: Iterable[Task], directory: str) -> List[str]:
    """
    Writes every task to its own subdirectory and lists the task ids, in
    order, in ``tasks.txt``.
    """
    os.makedirs(directory, exist_ok=True)
    ids = []
    for task in tasks:
        write_task(task, os.path.join(directory, task.id))
        ids.append(task.id)
    with open(os.path.join(directory, UNIVERSE_FILE), "w", encoding="utf-8") as handle:
        handle.writelines(f"{task_id}\n" for task_id in ids)
    return ids


def read_universe(directory: str) -> List[Task]:
    """
    Reads a universe written by :func:`write_universe`, or, without a
    ``tasks.txt``, every task subdirectory in sorted order.
    """
    listing = os.path.join(directory, UNIVERSE_FILE)
    if os.path.exists(listing):
        with open(listing, encoding="utf-8") as handle:
            ids = [line.strip() for line in handle if line.strip()]
    else:
        ids = sorted(
            entry for entry in os.listdir(directory)
            if os.path.exists(os.path.join(directory, entry, META_FILE))
        )
    if not ids:
        raise FormatError("no tasks found", directory)
    return [read_task(os.path.join(directory, task_id)) for task_id in ids]


def load_universe(config: RunConfig) -> List[Task]:
    """
    Returns the tasks of a run: a persisted universe or dataset under
    ``data_path``, or a freshly generated synthetic universe.
    """
    path = config.data_path
    preset = config.preset
    if path:
        if preset == "cifar":
            return [load_cifar_gray(path)]
        if preset == "temperature":
            return [load_daily_temperature(path)]
        return read_universe(path)
    if preset in ("gp", "micro"):
        return generate_gp_universe(
            GpUniverseConfig(seed=config.seed, max_inputs=config.max_inputs,
                             max_outputs=config.max_outputs)
        )
    if preset == "hyperspheres":
        return generate_hypersphere_universe(
            HypersphereUniverseConfig(seed=config.seed, max_features=config.max_features,
                                      max_classes=config.max_classes)
        )
    raise ConfigError(f"preset {preset!r} needs data_path", key="data_path")
