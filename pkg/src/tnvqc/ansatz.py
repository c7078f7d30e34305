"""Two-qubit unitary blocks and TTN / MERA / hardware-efficient circuit builders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import HAVE_NUMBA, forward_compiled
from .sim import Gate, State, apply_gates_batch

LAYOUT_TTN = "TTN"
LAYOUT_MERA = "MERA"
LAYOUT_MERA_MODIFIED = "MERA_MODIFIED"
LAYOUT_HWE = "HWE"


@dataclass(frozen=True)
class BlockSpec:
    kind: str
    params_per_block: int


# U: cheap entangler, 6 rotations + 3 CNOTs.  V: full SU(4) element,
# 15 rotations in the canonical 3-CNOT two-qubit decomposition.
BLOCK_U = BlockSpec("U", 6)
BLOCK_V = BlockSpec("V", 15)
_BLOCKS = {"U": BLOCK_U, "V": BLOCK_V}


def block_spec(kind) -> BlockSpec:
    if isinstance(kind, BlockSpec):
        return kind
    try:
        return _BLOCKS[kind]
    except KeyError:
        raise ValueError(f"unknown block kind {kind!r}, expected 'U' or 'V'") from None


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list with param slots 0..n_params-1, each used once."""

    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int
    layout_tag: str = "CUSTOM"
    block_kind: str = "none"
    layers: int = 1

    def __post_init__(self):
        used = sorted(
            g.param_slot for g in self.gates if g.param_slot is not None
        )
        if used != list(range(self.n_params)):
            raise ValueError(
                f"param slots must be 0..{self.n_params - 1} each used once, got {used}"
            )
        for g in self.gates:
            if any(q >= self.n_qubits or q < 0 for q in g.qubits):
                raise ValueError(f"gate {g} out of range for {self.n_qubits} qubits")


def block_u(qubit_a: int, qubit_b: int, slot_base: int) -> list[Gate]:
    """Layer-wise entangler: (rotation row, CNOT) x 3 with alternating CNOT
    direction and RX / RY / RX rotation rows.  All angles zero composes to a
    SWAP; the axis mix makes uniformly sampled blocks markedly closer to Haar
    than single-axis rows.
    """
    if qubit_a == qubit_b:
        raise ValueError("block qubits must differ")
    a, b, s = qubit_a, qubit_b, slot_base
    return [
        Gate("RX", (a,), s + 0),
        Gate("RX", (b,), s + 1),
        Gate("CNOT", (a, b)),
        Gate("RY", (a,), s + 2),
        Gate("RY", (b,), s + 3),
        Gate("CNOT", (b, a)),
        Gate("RX", (a,), s + 4),
        Gate("RX", (b,), s + 5),
        Gate("CNOT", (a, b)),
    ]


def block_v(qubit_a: int, qubit_b: int, slot_base: int) -> list[Gate]:
    """General SU(4) block: local RZ-RY-RZ frames around a 3-CNOT core."""
    if qubit_a == qubit_b:
        raise ValueError("block qubits must differ")
    a, b, s = qubit_a, qubit_b, slot_base
    return [
        Gate("RZ", (a,), s + 0),
        Gate("RY", (a,), s + 1),
        Gate("RZ", (a,), s + 2),
        Gate("RZ", (b,), s + 3),
        Gate("RY", (b,), s + 4),
        Gate("RZ", (b,), s + 5),
        Gate("CNOT", (b, a)),
        Gate("RZ", (a,), s + 6),
        Gate("RY", (b,), s + 7),
        Gate("CNOT", (a, b)),
        Gate("RY", (b,), s + 8),
        Gate("CNOT", (b, a)),
        Gate("RZ", (a,), s + 9),
        Gate("RY", (a,), s + 10),
        Gate("RZ", (a,), s + 11),
        Gate("RZ", (b,), s + 12),
        Gate("RY", (b,), s + 13),
        Gate("RZ", (b,), s + 14),
    ]


_BLOCK_BUILDERS = {"U": block_u, "V": block_v}

# Block placements for one layer, in application order.  The tree carries
# the inner qubit of each pair upward, so the final block sits on the
# readout pair: (1, 2) for four qubits, (2, 5) for eight.
_TTN_PAIRS = {
    4: [(0, 1), (2, 3), (1, 2)],
    8: [(0, 1), (2, 3), (4, 5), (6, 7), (1, 2), (5, 6), (2, 5)],
}
_MERA_PAIRS = {
    4: [(1, 2), (0, 1), (2, 3), (1, 2)],
    8: [
        (1, 2), (3, 4), (5, 6),
        (0, 1), (2, 3), (4, 5), (6, 7),
        (2, 5),
        (1, 2), (5, 6),
        (2, 5),
    ],
}


def _build_from_pairs(n_qubits, pairs, block, layers, layout_tag) -> Circuit:
    spec = block_spec(block)
    builder = _BLOCK_BUILDERS[spec.kind]
    gates: list[Gate] = []
    slot = 0
    for _ in range(layers):
        for a, b in pairs:
            gates.extend(builder(a, b, slot))
            slot += spec.params_per_block
    return Circuit(
        n_qubits=n_qubits,
        gates=tuple(gates),
        n_params=slot,
        layout_tag=layout_tag,
        block_kind=spec.kind,
        layers=layers,
    )


def build_ttn(n_qubits: int, block="U", layers: int = 1) -> Circuit:
    """Binary-tree circuit; one layer has n-1 blocks for n in {4, 8}."""
    if n_qubits not in _TTN_PAIRS:
        raise ValueError(f"TTN layout is built in for 4 or 8 qubits, got {n_qubits}")
    if layers < 1:
        raise ValueError("layers must be >= 1")
    return _build_from_pairs(n_qubits, _TTN_PAIRS[n_qubits], block, layers, LAYOUT_TTN)


def build_mera(n_qubits: int, block="U", layers: int = 1, variant: str = "standard") -> Circuit:
    """TTN plus disentanglers across adjacent subtrees before each tree level.

    variant="modified" (4 qubits only) moves the leading disentangler to the
    outer pair (0, 3) so correlation across the ends spreads first.
    """
    if n_qubits not in _MERA_PAIRS:
        raise ValueError(f"MERA layout is built in for 4 or 8 qubits, got {n_qubits}")
    if layers < 1:
        raise ValueError("layers must be >= 1")
    if variant not in ("standard", "modified"):
        raise ValueError(f"unknown MERA variant {variant!r}")
    pairs = list(_MERA_PAIRS[n_qubits])
    tag = LAYOUT_MERA
    if variant == "modified":
        if n_qubits != 4:
            raise ValueError("modified MERA is defined for 4 qubits only")
        pairs[0] = (0, 3)
        tag = LAYOUT_MERA_MODIFIED
    return _build_from_pairs(n_qubits, pairs, block, layers, tag)


def build_hardware_efficient(n_qubits: int, depth: int) -> Circuit:
    """Per depth layer: RY and RZ on every qubit, then a CNOT chain; final RY row."""
    if n_qubits < 2:
        raise ValueError("hardware-efficient ansatz needs at least 2 qubits")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    gates: list[Gate] = []
    slot = 0
    for _ in range(depth):
        for q in range(n_qubits):
            gates.append(Gate("RY", (q,), slot + q))
        slot += n_qubits
        for q in range(n_qubits):
            gates.append(Gate("RZ", (q,), slot + q))
        slot += n_qubits
        for q in range(n_qubits - 1):
            gates.append(Gate("CNOT", (q, q + 1)))
    for q in range(n_qubits):
        gates.append(Gate("RY", (q,), slot + q))
    slot += n_qubits
    return Circuit(
        n_qubits=n_qubits,
        gates=tuple(gates),
        n_params=slot,
        layout_tag=LAYOUT_HWE,
        block_kind="none",
        layers=depth,
    )


def run_ansatz(circuit: Circuit, params, input_state: State) -> State:
    """Apply the circuit to a state with param slots resolved from `params`."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (circuit.n_params,):
        raise ValueError(
            f"expected {circuit.n_params} parameters, got shape {params.shape}"
        )
    if input_state.n_qubits != circuit.n_qubits:
        raise ValueError(
            f"{circuit.n_qubits}-qubit circuit cannot run on "
            f"{input_state.n_qubits}-qubit state"
        )
    amps = np.ascontiguousarray(input_state.amplitudes.reshape(1, -1).copy())
    apply_gates_batch(amps, circuit.gates, params, circuit.n_qubits)
    return State(circuit.n_qubits, amps.ravel())


def run_ansatz_batch(circuit: Circuit, params, input_amps: np.ndarray) -> np.ndarray:
    """Batched execution: params (P,) or (B, P); input_amps (dim,) or (B, dim).

    Returns a fresh (B, dim) array; inputs are broadcast against each other.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.ndim == 1:
        params = params[None, :]
    if params.shape[1] != circuit.n_params:
        raise ValueError(
            f"expected {circuit.n_params} parameters, got {params.shape[1]}"
        )
    amps = np.asarray(input_amps, dtype=np.complex128)
    if amps.ndim == 1:
        amps = amps[None, :]
    if amps.shape[1] != (1 << circuit.n_qubits):
        raise ValueError(
            f"state dimension {amps.shape[1]} does not match "
            f"{circuit.n_qubits}-qubit circuit"
        )
    batch = max(params.shape[0], amps.shape[0])
    if params.shape[0] not in (1, batch):
        raise ValueError(
            f"batch mismatch: {params.shape[0]} parameter rows vs {batch} states"
        )
    out = np.ascontiguousarray(np.broadcast_to(amps, (batch, amps.shape[1])).copy())
    if HAVE_NUMBA:
        return forward_compiled(circuit, out, params)
    resolved = params[0] if params.shape[0] == 1 else params
    apply_gates_batch(out, circuit.gates, resolved, circuit.n_qubits)
    return out


def circuit_to_text(circuit: Circuit) -> str:
    """One gate per line: KIND q0 [q1] [slot=k|angle=x]."""
    lines = []
    for g in circuit.gates:
        parts = [g.kind] + [str(q) for q in g.qubits]
        if g.param_slot is not None:
            parts.append(f"slot={g.param_slot}")
        elif g.fixed_angle is not None:
            parts.append(f"angle={g.fixed_angle!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
