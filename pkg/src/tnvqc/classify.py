"""End-to-end classification pipelines: readout decoding, splits, evaluation.

Phase task: the stored ground state is the circuit input and class
probabilities come from softmaxed computational-basis probabilities of the
readout pair ((1, 2) for four spins, (2, 5) for eight, zero-based from the
paper-style one-based numbering).  Image task: amplitude-encoded pixels in,
p(class 0) = (1 + <Z_2>) / 2 out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .ansatz import Circuit
from .engine import (
    SingleZReadoutLoss,
    TrainConfig,
    TrainReport,
    TwoQubitReadoutLoss,
    predict_probabilities,
    train,
)
from .sim import State
from .spin import PhaseDataset

READOUT_SINGLE_Z = "single_z"
READOUT_TWO_QUBIT = "two_qubit_amplitude"

IMAGE_READOUT_QUBIT = 2  # "third qubit", zero-based


@dataclass(frozen=True)
class ReadoutSpec:
    kind: str
    qubits: tuple[int, ...]
    n_classes: int

    def __post_init__(self):
        if self.kind == READOUT_SINGLE_Z:
            if len(self.qubits) != 1 or self.n_classes != 2:
                raise ValueError("single_z readout uses one qubit and two classes")
        elif self.kind == READOUT_TWO_QUBIT:
            if len(self.qubits) != 2 or not 2 <= self.n_classes <= 4:
                raise ValueError(
                    "two_qubit_amplitude readout uses a qubit pair and 2..4 classes"
                )
        else:
            raise ValueError(f"unknown readout kind {self.kind!r}")


def phase_readout_pair(n_qubits: int) -> tuple[int, int]:
    if n_qubits == 4:
        return (1, 2)
    if n_qubits == 8:
        return (2, 5)
    raise ValueError(f"no built-in readout pair for {n_qubits} qubits")


def _loss_for_readout(readout: ReadoutSpec, n_qubits: int):
    if readout.kind == READOUT_SINGLE_Z:
        return SingleZReadoutLoss(n_qubits, readout.qubits[0])
    return TwoQubitReadoutLoss(n_qubits, readout.qubits, readout.n_classes)


def decode_phase_probs(state: State, readout: ReadoutSpec) -> np.ndarray:
    """Plain softmax over the first n_classes basis-outcome probabilities of
    the readout pair.  (The trained loss head applies a fixed logit gain,
    which changes nothing here: softmax temperature preserves the ranking.)"""
    if readout.kind != READOUT_TWO_QUBIT:
        raise ValueError(f"expected two_qubit_amplitude readout, got {readout.kind!r}")
    loss = TwoQubitReadoutLoss(
        state.n_qubits, readout.qubits, readout.n_classes, logit_scale=1.0
    )
    return loss.probabilities(loss.expectations(state.amplitudes[None, :]))[0]


def decode_image_probs(state: State, readout: ReadoutSpec) -> np.ndarray:
    if readout.kind != READOUT_SINGLE_Z:
        raise ValueError(f"expected single_z readout, got {readout.kind!r}")
    loss = _loss_for_readout(readout, state.n_qubits)
    return loss.probabilities(loss.expectations(state.amplitudes[None, :]))[0]


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[int, int, int]
    seed: int
    stratified: bool = True

    def __post_init__(self):
        if any(r <= 0 for r in self.ratios):
            raise ValueError(f"split ratios must be positive, got {self.ratios}")


def _proportional_counts(n: int, ratios) -> list[int]:
    """Largest-remainder apportionment of n items over the ratio parts."""
    total = sum(ratios)
    raw = [n * r / total for r in ratios]
    counts = [int(x) for x in raw]
    remainders = sorted(
        range(len(ratios)), key=lambda k: (raw[k] - counts[k], -k), reverse=True
    )
    for k in remainders[: n - sum(counts)]:
        counts[k] += 1
    return counts


def split_dataset(records, spec: SplitSpec, label_of=lambda r: r.label):
    """Seeded stratified split into (train, val, test); disjoint and exhaustive."""
    records = list(records)
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        groups = {}
        for rec in records:
            groups.setdefault(label_of(rec), []).append(rec)
        group_items = [groups[k] for k in sorted(groups)]
    else:
        group_items = [records]
    splits: tuple[list, list, list] = ([], [], [])
    for group in group_items:
        if len(group) < len(spec.ratios):
            raise ValueError(
                f"class with {len(group)} records cannot fill {len(spec.ratios)} splits"
            )
        order = rng.permutation(len(group))
        counts = _proportional_counts(len(group), spec.ratios)
        start = 0
        for part, count in zip(splits, counts):
            part.extend(group[i] for i in order[start : start + count])
            start += count
    return splits


@dataclass(frozen=True)
class Pipeline:
    """A circuit plus its readout decoding; enough to score any input state."""

    circuit: Circuit
    readout: ReadoutSpec

    def probabilities(self, params, amps: np.ndarray) -> np.ndarray:
        loss = _loss_for_readout(self.readout, self.circuit.n_qubits)
        return predict_probabilities(self.circuit, np.asarray(params), amps, loss)


def evaluate(pipeline: Pipeline, params, records) -> float:
    """Fraction of records whose argmax probability matches the label
    (argmax ties resolve toward the lower class index)."""
    records = list(records)
    if not records:
        raise ValueError("cannot evaluate on an empty record list")
    amps = np.stack([np.asarray(r.amplitudes, dtype=np.complex128) for r in records])
    labels = np.array([r.label for r in records])
    probs = pipeline.probabilities(params, amps)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def _stack_split(records) -> tuple[np.ndarray, np.ndarray]:
    amps = np.stack([np.asarray(r.amplitudes, dtype=np.complex128) for r in records])
    labels = np.array([r.label for r in records])
    return amps, labels


def _split_seed(run_seed: int) -> int:
    # Third spawn child: train() consumes children 0 and 1 for init / shuffle.
    return int(np.random.SeedSequence(run_seed).spawn(3)[2].generate_state(1)[0])


def phase_pipeline(
    dataset: PhaseDataset,
    ansatz: Circuit,
    config: TrainConfig,
    split_ratios: tuple[int, int, int] = (3, 1, 1),
) -> TrainReport:
    """Train a phase classifier on ED ground states and report test accuracy."""
    n = dataset.lattice.n_sites
    if ansatz.n_qubits != n:
        raise ValueError(
            f"{ansatz.n_qubits}-qubit ansatz does not match {n}-site lattice"
        )
    readout = ReadoutSpec(READOUT_TWO_QUBIT, phase_readout_pair(n), dataset.n_classes)
    loss = _loss_for_readout(readout, n)
    split_seed = _split_seed(config.seed)
    parts = split_dataset(dataset.records, SplitSpec(split_ratios, split_seed))
    train_set, val_set, test_set = (_stack_split(p) for p in parts)
    meta = {
        "task": "phase",
        "model": dataset.model,
        "lattice": dataset.lattice.label(),
        "layout": ansatz.layout_tag,
        "block": ansatz.block_kind,
        "layers": ansatz.layers,
        "readout_qubits": list(readout.qubits),
        "n_classes": readout.n_classes,
        "split_ratios": list(split_ratios),
    }
    return train(ansatz, loss, train_set, val_set, test_set, config, meta=meta)


def pairwise_image_pipeline(
    encoded,
    class_a: int,
    class_b: int,
    ansatz: Circuit,
    config: TrainConfig,
    split_ratios: tuple[int, int, int] = (5, 1, 1),
    epochs: int | None = None,
) -> TrainReport:
    """Train a binary image classifier on amplitude-encoded records.

    `encoded` holds EncodedImage-like records (unit vector + original 0..9
    label); the two requested classes are filtered and relabeled a -> 0,
    b -> 1 before the split.  When `epochs` is given, config.iterations is
    recomputed as epochs * ceil(train_size / batch_size).
    """
    if class_a == class_b:
        raise ValueError("pairwise classification needs two distinct classes")
    readout = ReadoutSpec(READOUT_SINGLE_Z, (IMAGE_READOUT_QUBIT,), 2)
    loss = _loss_for_readout(readout, ansatz.n_qubits)

    @dataclass(frozen=True)
    class _Sample:
        amplitudes: np.ndarray
        label: int

    relabel = {class_a: 0, class_b: 1}
    samples = [
        _Sample(np.asarray(r.vector, dtype=np.complex128), relabel[r.label])
        for r in encoded
        if r.label in relabel
    ]
    if not samples:
        raise ValueError(f"no records with labels {class_a} or {class_b}")
    split_seed = _split_seed(config.seed)
    parts = split_dataset(samples, SplitSpec(split_ratios, split_seed))
    train_set, val_set, test_set = (_stack_split(p) for p in parts)
    if epochs is not None:
        iterations = epochs * math.ceil(len(train_set[0]) / config.batch_size)
        config = replace(config, iterations=iterations)
    meta = {
        "task": "image",
        "model": f"{class_a}-vs-{class_b}",
        "lattice": "",
        "layout": ansatz.layout_tag,
        "block": ansatz.block_kind,
        "layers": ansatz.layers,
        "readout_qubits": [IMAGE_READOUT_QUBIT],
        "n_classes": 2,
        "split_ratios": list(split_ratios),
        "class_pair": [class_a, class_b],
    }
    return train(ansatz, loss, train_set, val_set, test_set, config, meta=meta)
