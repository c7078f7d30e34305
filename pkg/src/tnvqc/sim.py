"""Dense statevector simulator: states, gates, expectation values, fidelities.

Bit convention used everywhere in this package: qubit 0 is the most
significant bit of the basis index, so |q0 q1 ... q_{n-1}> lives at index
sum_k q_k * 2**(n-1-k).  Rotation gates follow exp(-i * theta * P / 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CNOT",)

# Generous ceiling for dense simulation; 2**14 amplitudes is still desk scale.
MAX_QUBITS = 14

# Probabilities this far below zero are floating-point noise and get clamped;
# anything more negative indicates an internal inconsistency.
NEG_PROB_TOL = -1e-12


@dataclass(frozen=True)
class Gate:
    """One placed gate: a Pauli rotation (parametrized or fixed) or a CNOT."""

    kind: str
    qubits: tuple[int, ...]
    param_slot: int | None = None
    fixed_angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"gate qubits must be distinct, got {self.qubits}")
        if self.kind == "CNOT":
            if len(self.qubits) != 2:
                raise ValueError("CNOT acts on exactly two qubits")
            if self.param_slot is not None or self.fixed_angle is not None:
                raise ValueError("CNOT carries no parameter")
        else:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on exactly one qubit")
            if (self.param_slot is None) == (self.fixed_angle is None):
                raise ValueError(
                    f"{self.kind} needs exactly one of param_slot / fixed_angle"
                )


@dataclass
class State:
    """Normalized amplitude vector over n_qubits; treat as immutable."""

    n_qubits: int
    amplitudes: np.ndarray

    def copy(self) -> "State":
        return State(self.n_qubits, self.amplitudes.copy())


def new_state(n_qubits: int, max_qubits: int = MAX_QUBITS) -> State:
    """All-zeros computational basis state |0...0>."""
    if not 1 <= n_qubits <= max_qubits:
        raise ValueError(f"n_qubits must be in [1, {max_qubits}], got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return State(n_qubits, amps)


def amplitude_encode(vector) -> State:
    """Write a real vector of power-of-two length into state amplitudes."""
    vec = np.asarray(vector, dtype=np.float64).ravel()
    dim = vec.size
    if dim < 2 or dim & (dim - 1):
        raise ValueError(f"vector length must be a power of two >= 2, got {dim}")
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValueError("cannot amplitude-encode the zero vector")
    return State(dim.bit_length() - 1, (vec / norm).astype(np.complex128))


def _check_qubit(n_qubits: int, qubit: int):
    if not 0 <= qubit < n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {n_qubits} qubits")


def _resolve_angles(gate: Gate, params) -> np.ndarray | float:
    """Angle(s) for a rotation gate: per-row when params is a matrix."""
    if gate.fixed_angle is not None:
        return gate.fixed_angle
    params = np.asarray(params)
    if gate.param_slot >= params.shape[-1]:
        raise IndexError(
            f"param_slot {gate.param_slot} out of bounds for "
            f"{params.shape[-1]} parameters"
        )
    return params[..., gate.param_slot]


def _apply_rotation_batch(amps: np.ndarray, kind: str, qubit: int, angles, n: int):
    """In-place rotation on batched amplitudes of shape (B, 2**n)."""
    batch = amps.shape[0]
    d_left = 1 << qubit
    d_right = 1 << (n - qubit - 1)
    a = amps.reshape(batch, d_left, 2, d_right)
    half = np.multiply(angles, 0.5)
    if np.ndim(half) == 1:
        half = half[:, None, None]
    if kind == "RZ":
        phase = np.exp(-1j * half)
        a[:, :, 0, :] *= phase
        a[:, :, 1, :] *= np.conj(phase)
        return
    c = np.cos(half)
    s = np.sin(half)
    a0 = a[:, :, 0, :]
    a1 = a[:, :, 1, :]
    if kind == "RY":
        new0 = c * a0 - s * a1
        new1 = s * a0 + c * a1
    else:  # RX
        new0 = c * a0 - 1j * s * a1
        new1 = -1j * s * a0 + c * a1
    a[:, :, 0, :] = new0
    a[:, :, 1, :] = new1


def _apply_cnot_batch(amps: np.ndarray, control: int, target: int, n: int):
    """In-place CNOT on batched amplitudes of shape (B, 2**n)."""
    batch = amps.shape[0]
    a = amps.reshape((batch,) + (2,) * n)
    sel0 = [slice(None)] * (n + 1)
    sel0[1 + control] = 1
    sel0[1 + target] = 0
    sel1 = list(sel0)
    sel1[1 + target] = 1
    tmp = a[tuple(sel0)].copy()
    a[tuple(sel0)] = a[tuple(sel1)]
    a[tuple(sel1)] = tmp


def apply_gates_batch(amps: np.ndarray, gates, params, n_qubits: int) -> np.ndarray:
    """Apply a gate sequence in place to (B, 2**n) amplitudes.

    `params` may be a flat vector (shared by the whole batch) or a (B, P)
    matrix giving each batch row its own angles.
    """
    for gate in gates:
        for q in gate.qubits:
            _check_qubit(n_qubits, q)
        if gate.kind == "CNOT":
            _apply_cnot_batch(amps, gate.qubits[0], gate.qubits[1], n_qubits)
        else:
            angles = _resolve_angles(gate, params)
            _apply_rotation_batch(amps, gate.kind, gate.qubits[0], angles, n_qubits)
    return amps


def apply_gate(state: State, gate: Gate, params=None) -> State:
    """Apply one gate, resolving param_slot against `params` if present."""
    if gate.param_slot is not None and params is None:
        raise ValueError("gate has a param_slot but no parameter vector was given")
    out = state.amplitudes.copy().reshape(1, -1)
    apply_gates_batch(out, [gate], params, state.n_qubits)
    return State(state.n_qubits, out.ravel())


def expectation_z(state: State, qubit: int) -> float:
    _check_qubit(state.n_qubits, qubit)
    return float(_z_expectations_batch(state.amplitudes[None, :], (qubit,), state.n_qubits)[0, 0])


def expectation_zz(state: State, q_i: int, q_j: int) -> float:
    if q_i == q_j:
        raise ValueError("expectation_zz needs two distinct qubits")
    _check_qubit(state.n_qubits, q_i)
    _check_qubit(state.n_qubits, q_j)
    diag = z_diagonal(state.n_qubits, q_i) * z_diagonal(state.n_qubits, q_j)
    probs = np.abs(state.amplitudes) ** 2
    return float(probs @ diag)


def z_diagonal(n_qubits: int, qubit: int) -> np.ndarray:
    """Diagonal of the Z observable on `qubit` as a (2**n,) +/-1 vector."""
    _check_qubit(n_qubits, qubit)
    idx = np.arange(1 << n_qubits)
    bits = (idx >> (n_qubits - 1 - qubit)) & 1
    return 1.0 - 2.0 * bits


def _z_expectations_batch(amps: np.ndarray, qubits, n_qubits: int) -> np.ndarray:
    """<Z_q> for each qubit in `qubits` over a (B, dim) batch -> (B, len(qubits))."""
    probs = np.abs(amps) ** 2
    cols = [probs @ z_diagonal(n_qubits, q) for q in qubits]
    return np.stack(cols, axis=1)


def two_qubit_basis_probs(state: State, q_i: int, q_j: int) -> np.ndarray:
    """[p00, p01, p10, p11] of the (q_i, q_j) readout pair.

    Reconstructed from <Z_i>, <Z_j>, <Z_i Z_j> as
    p_ab = (1 + (-1)^a <Z_i> + (-1)^b <Z_j> + (-1)^(a+b) <Z_i Z_j>) / 4.
    """
    zi = expectation_z(state, q_i)
    zj = expectation_z(state, q_j)
    zz = expectation_zz(state, q_i, q_j)
    probs = np.array(
        [
            (1 + zi + zj + zz) / 4,
            (1 + zi - zj - zz) / 4,
            (1 - zi + zj - zz) / 4,
            (1 - zi - zj + zz) / 4,
        ]
    )
    if np.any(probs < NEG_PROB_TOL):
        raise RuntimeError(f"reconstructed probabilities inconsistent: {probs}")
    return np.clip(probs, 0.0, None)


def fidelity(s1: State, s2: State) -> float:
    """Squared overlap |<s1|s2>|**2."""
    if s1.n_qubits != s2.n_qubits:
        raise ValueError(
            f"states have different sizes: {s1.n_qubits} vs {s2.n_qubits} qubits"
        )
    return float(np.abs(np.vdot(s1.amplitudes, s2.amplitudes)) ** 2)


def reduced_density_single(state: State, qubit: int) -> np.ndarray:
    """2x2 reduced density matrix of one qubit (all others traced out)."""
    _check_qubit(state.n_qubits, qubit)
    return single_qubit_densities_batch(
        state.amplitudes[None, :], (qubit,), state.n_qubits
    )[0, 0]


def single_qubit_densities_batch(amps: np.ndarray, qubits, n_qubits: int) -> np.ndarray:
    """Reduced 1-qubit density matrices for a (B, dim) batch -> (B, len(qubits), 2, 2)."""
    batch = amps.shape[0]
    out = np.empty((batch, len(qubits), 2, 2), dtype=np.complex128)
    for k, q in enumerate(qubits):
        d_left = 1 << q
        d_right = 1 << (n_qubits - q - 1)
        a = amps.reshape(batch, d_left, 2, d_right)
        out[:, k] = np.einsum("blsr,bltr->bst", a, a.conj())
    return out


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def pauli_string_action(n_qubits: int, string: str):
    """Index permutation and phase such that (P psi)[r] = phase[r] * psi[perm[r]].

    Per-site letters: I (skip), X (bit flip), Y (flip with i*(-1)^bit),
    Z (sign (-1)^bit).
    """
    if len(string) != n_qubits:
        raise ValueError(
            f"pauli string length {len(string)} != n_qubits {n_qubits}"
        )
    dim = 1 << n_qubits
    idx = np.arange(dim)
    mask = 0
    phase = np.ones(dim, dtype=np.complex128)
    for k, letter in enumerate(string):
        bitpos = n_qubits - 1 - k
        if letter == "I":
            continue
        bit = (idx >> bitpos) & 1
        if letter == "X":
            mask |= 1 << bitpos
        elif letter == "Y":
            mask |= 1 << bitpos
            phase *= 1j * (1.0 - 2.0 * bit)
        elif letter == "Z":
            phase *= 1.0 - 2.0 * bit
        else:
            raise ValueError(f"bad pauli letter {letter!r} in {string!r}")
    perm = idx ^ mask
    # phase was built column-wise (P|b> = phase[b] |b^mask>); convert to rows.
    return perm, phase[perm]


def apply_hamiltonian_batch(amps: np.ndarray, hamiltonian) -> np.ndarray:
    """H |psi> for a (B, dim) batch of states."""
    out = np.zeros_like(amps)
    n = hamiltonian.n_qubits
    for coeff, string in hamiltonian.terms:
        perm, phase = pauli_string_action(n, string)
        out += coeff * phase * amps[:, perm]
    return out


def expectation_hamiltonian(state: State, hamiltonian) -> float:
    """<state| H |state>, checked to be real."""
    if (1 << hamiltonian.n_qubits) != state.amplitudes.size:
        raise ValueError(
            f"hamiltonian on {hamiltonian.n_qubits} qubits does not match "
            f"{state.n_qubits}-qubit state"
        )
    val = np.vdot(state.amplitudes, apply_hamiltonian_batch(state.amplitudes[None, :], hamiltonian)[0])
    if abs(val.imag) > 1e-10:
        raise RuntimeError(f"energy has non-negligible imaginary part: {val}")
    return float(val.real)
