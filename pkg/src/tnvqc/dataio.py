"""Fashion-MNIST IDX ingestion, image preprocessing, and dataset/result files.

The phase-dataset binary format ("QPRD"): magic, u32 version=1, u8 model
code, u8 rows, u8 cols, u8 n_classes, u32 record count; then per record
f64 sweep value, u8 label, f64 energy, and 2^n little-endian (f64 re,
f64 im) amplitude pairs.  A JSON sidecar (<path>.json) carries the
generation config and seed.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import TrainReport
from .spin import Lattice, PhaseDataset, PhaseRecord, build_lattice

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IMAGE_SIDE = 28
RESIZED_SIDE = 16  # 16 * 16 = 2**8 amplitudes

QPRD_MAGIC = b"QPRD"
QPRD_VERSION = 1
MODEL_CODES = {"tfim": 0, "xxz": 1}
MODEL_NAMES = {v: k for k, v in MODEL_CODES.items()}

FASHION_CLASSES = (
    "T-shirt",
    "Trouser",
    "Pullover",
    "Dress",
    "Coat",
    "Sandal",
    "Shirt",
    "Sneaker",
    "Bag",
    "Ankle boot",
)


class FormatError(ValueError):
    """Malformed binary input; `offset` is the failing byte position."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class ImageRecord:
    pixels: np.ndarray  # (28, 28) uint8
    label: int


@dataclass(frozen=True)
class EncodedImage:
    vector: np.ndarray  # (256,) float64, unit norm
    label: int


def load_idx(images_path, labels_path) -> list[ImageRecord]:
    """Parse big-endian IDX image/label file pair into records."""
    images_raw = Path(images_path).read_bytes()
    labels_raw = Path(labels_path).read_bytes()

    if len(images_raw) < 16:
        raise FormatError(f"{images_path}: truncated image header", len(images_raw))
    magic, count, rows, cols = struct.unpack(">IIII", images_raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"{images_path}: bad image magic {magic:#010x}", 0)
    if (rows, cols) != (IMAGE_SIDE, IMAGE_SIDE):
        raise FormatError(f"{images_path}: expected 28x28 images, got {rows}x{cols}", 8)
    expected = 16 + count * IMAGE_SIDE * IMAGE_SIDE
    if len(images_raw) != expected:
        raise FormatError(
            f"{images_path}: size {len(images_raw)} != declared {expected}",
            min(len(images_raw), expected),
        )

    if len(labels_raw) < 8:
        raise FormatError(f"{labels_path}: truncated label header", len(labels_raw))
    lmagic, lcount = struct.unpack(">II", labels_raw[:8])
    if lmagic != IDX_LABELS_MAGIC:
        raise FormatError(f"{labels_path}: bad label magic {lmagic:#010x}", 0)
    if lcount != count:
        raise FormatError(
            f"count mismatch: {count} images vs {lcount} labels", 4
        )
    if len(labels_raw) != 8 + count:
        raise FormatError(
            f"{labels_path}: size {len(labels_raw)} != declared {8 + count}",
            min(len(labels_raw), 8 + count),
        )

    pixels = np.frombuffer(images_raw, dtype=np.uint8, offset=16)
    pixels = pixels.reshape(count, IMAGE_SIDE, IMAGE_SIDE)
    labels = np.frombuffer(labels_raw, dtype=np.uint8, offset=8)
    if labels.size and labels.max() > 9:
        raise FormatError(f"{labels_path}: label {labels.max()} out of range", None)
    return [ImageRecord(pixels[i], int(labels[i])) for i in range(count)]


def _resize_weights(src: int, dst: int) -> np.ndarray:
    """Corner-aligned bilinear weights: (dst, src), rows sum to 1."""
    weights = np.zeros((dst, src))
    positions = np.linspace(0.0, src - 1.0, dst)
    lo = np.floor(positions).astype(int)
    frac = positions - lo
    hi = np.minimum(lo + 1, src - 1)
    for i in range(dst):
        weights[i, lo[i]] += 1.0 - frac[i]
        weights[i, hi[i]] += frac[i]
    return weights


_W16 = _resize_weights(IMAGE_SIDE, RESIZED_SIDE)


def bilinear_resize(image: np.ndarray, side: int = RESIZED_SIDE) -> np.ndarray:
    """Separable corner-aligned bilinear resample of a square image."""
    w = _W16 if (side == RESIZED_SIDE and image.shape[0] == IMAGE_SIDE) else _resize_weights(image.shape[0], side)
    return w @ image.astype(np.float64) @ w.T


def preprocess(image: ImageRecord) -> EncodedImage:
    """28x28 pixels -> unit-norm 256-vector (bilinear 16x16, row-major flatten)."""
    vec = bilinear_resize(np.asarray(image.pixels)).ravel()
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        log.warning("all-zero image (label %d) mapped to the uniform vector", image.label)
        vec = np.full(RESIZED_SIDE * RESIZED_SIDE, 1.0 / RESIZED_SIDE)
    else:
        vec = vec / norm
    return EncodedImage(vector=vec, label=image.label)


def save_dataset(dataset: PhaseDataset, path, extra_config: dict | None = None):
    """Write the QPRD binary plus a JSON sidecar describing its provenance."""
    path = Path(path)
    lat = dataset.lattice
    n = lat.n_sites
    parts = [
        QPRD_MAGIC,
        struct.pack(
            "<IBBBBI",
            QPRD_VERSION,
            MODEL_CODES[dataset.model],
            lat.rows,
            lat.cols,
            dataset.n_classes,
            len(dataset.records),
        ),
    ]
    for rec in dataset.records:
        parts.append(struct.pack("<dBd", rec.sweep_value, rec.label, rec.energy))
        amps = np.asarray(rec.amplitudes, dtype=np.complex128)
        if amps.size != 1 << n:
            raise ValueError(f"record has {amps.size} amplitudes, expected {1 << n}")
        interleaved = np.empty(2 * amps.size)
        interleaved[0::2] = amps.real
        interleaved[1::2] = amps.imag
        parts.append(interleaved.astype("<f8").tobytes())
    path.write_bytes(b"".join(parts))
    sidecar = {
        "format": "QPRD",
        "version": QPRD_VERSION,
        "model": dataset.model,
        "lattice": {"kind": lat.kind, "rows": lat.rows, "cols": lat.cols},
        "n_classes": dataset.n_classes,
        "n_records": len(dataset.records),
    }
    if extra_config:
        sidecar.update(extra_config)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_dataset(path) -> PhaseDataset:
    raw = Path(path).read_bytes()
    if raw[:4] != QPRD_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}", 0)
    header = struct.calcsize("<IBBBBI")
    if len(raw) < 4 + header:
        raise FormatError(f"{path}: truncated header", len(raw))
    version, model_code, rows, cols, n_classes, n_records = struct.unpack(
        "<IBBBBI", raw[4 : 4 + header]
    )
    if version != QPRD_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", 4)
    if model_code not in MODEL_NAMES:
        raise FormatError(f"{path}: unknown model code {model_code}", 8)
    n = rows * cols
    dim = 1 << n
    rec_size = struct.calcsize("<dBd") + 16 * dim
    expected = 4 + header + n_records * rec_size
    if len(raw) != expected:
        raise FormatError(
            f"{path}: size {len(raw)} != declared {expected}", min(len(raw), expected)
        )
    lattice = build_lattice("chain" if rows == 1 else "rectangular", rows, cols)
    records = []
    offset = 4 + header
    for _ in range(n_records):
        sweep, label, energy = struct.unpack_from("<dBd", raw, offset)
        offset += struct.calcsize("<dBd")
        flat = np.frombuffer(raw, dtype="<f8", count=2 * dim, offset=offset)
        offset += 16 * dim
        records.append(
            PhaseRecord(
                sweep_value=sweep,
                label=label,
                energy=energy,
                amplitudes=(flat[0::2] + 1j * flat[1::2]).astype(np.complex128),
            )
        )
    return PhaseDataset(
        model=MODEL_NAMES[model_code], lattice=lattice, records=tuple(records)
    )


RESULT_COLUMNS = (
    "task",
    "model",
    "lattice",
    "layout",
    "block",
    "layers",
    "variant",
    "seed",
    "test_accuracy",
)


def _result_row(report: TrainReport) -> list[str]:
    meta = report.meta
    layout = meta.get("layout", "")
    variant = "modified" if layout == "MERA_MODIFIED" else meta.get("variant", "standard")
    return [
        str(meta.get("task", "")),
        str(meta.get("model", "")),
        str(meta.get("lattice", "")),
        layout,
        str(meta.get("block", "")),
        str(meta.get("layers", "")),
        variant,
        str(report.config.get("seed", "")),
        repr(report.test_accuracy),
    ]


def write_results(reports, out_dir) -> list[Path]:
    """results.csv for all reports plus a lower-triangular pairwise-accuracy
    matrix for image reports; returns the written paths."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    results = out_dir / "results.csv"
    lines = [",".join(RESULT_COLUMNS)]
    lines += [",".join(_result_row(r)) for r in reports]
    results.write_text("\n".join(lines) + "\n")
    written.append(results)

    image_reports = [r for r in reports if r.meta.get("task") == "image"]
    if image_reports:
        acc = {}
        for r in image_reports:
            a, b = sorted(r.meta["class_pair"])
            acc[(a, b)] = r.test_accuracy
        matrix = out_dir / "pairwise_matrix.csv"
        header = "," + ",".join(FASHION_CLASSES)
        rows = []
        for i, name in enumerate(FASHION_CLASSES):
            cells = [name]
            for j in range(len(FASHION_CLASSES)):
                if j >= i:
                    cells.append("-" if j == i else "")
                else:
                    value = acc.get((j, i))
                    cells.append("" if value is None else repr(value))
            rows.append(",".join(cells))
        matrix.write_text(header + "\n" + "\n".join(rows) + "\n")
        written.append(matrix)
    return written


def report_to_json(report: TrainReport) -> str:
    payload = {
        "loss_history": report.loss_history,
        "val_accuracy_history": [
            {"iteration": i, "accuracy": a} for i, a in report.val_accuracy_history
        ],
        "final_params": report.final_params,
        "test_accuracy": report.test_accuracy,
        "config": report.config,
        "meta": report.meta,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> TrainReport:
    payload = json.loads(text)
    return TrainReport(
        loss_history=payload["loss_history"],
        val_accuracy_history=[
            (entry["iteration"], entry["accuracy"])
            for entry in payload["val_accuracy_history"]
        ],
        final_params=payload["final_params"],
        test_accuracy=payload["test_accuracy"],
        config=payload["config"],
        meta=payload["meta"],
    )


def write_loss_csv(report: TrainReport, path):
    """Iteration-indexed loss curve; validation accuracy only on its cadence."""
    val = dict(report.val_accuracy_history)
    lines = ["iteration,loss,val_accuracy"]
    for i, loss_value in enumerate(report.loss_history, start=1):
        acc = val.get(i)
        lines.append(f"{i},{loss_value!r},{'' if acc is None else repr(acc)}")
    Path(path).write_text("\n".join(lines) + "\n")
