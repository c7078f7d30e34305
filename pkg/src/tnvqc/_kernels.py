"""Compiled gate-application kernels.

The numpy reference kernels live in sim.py; this module packs a circuit's
gate list into flat op tables and, when numba is importable, runs the hot
loops (batched forward pass, adjoint backward sweep) as jitted code.  Both
paths compute the same per-amplitude expressions, so results agree to
floating-point round-off; unit tests compare them directly.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


KIND_RX, KIND_RY, KIND_RZ, KIND_CNOT = 0, 1, 2, 3
_KIND_CODES = {"RX": KIND_RX, "RY": KIND_RY, "RZ": KIND_RZ, "CNOT": KIND_CNOT}


def compile_gates(gates, n_qubits: int):
    """Flat op tables: (kinds, qubit_a, qubit_b, slots, fixed_angles)."""
    n_gates = len(gates)
    kinds = np.empty(n_gates, dtype=np.int64)
    qubit_a = np.empty(n_gates, dtype=np.int64)
    qubit_b = np.empty(n_gates, dtype=np.int64)
    slots = np.empty(n_gates, dtype=np.int64)
    fixed = np.zeros(n_gates, dtype=np.float64)
    for i, gate in enumerate(gates):
        kinds[i] = _KIND_CODES[gate.kind]
        qubit_a[i] = gate.qubits[0]
        qubit_b[i] = gate.qubits[1] if len(gate.qubits) > 1 else -1
        slots[i] = -1 if gate.param_slot is None else gate.param_slot
        if gate.fixed_angle is not None:
            fixed[i] = gate.fixed_angle
    return kinds, qubit_a, qubit_b, slots, fixed


def compiled_tables(circuit):
    """Memoized op tables for a Circuit (frozen dataclass, hence the setattr)."""
    tables = circuit.__dict__.get("_op_tables")
    if tables is None:
        tables = compile_gates(circuit.gates, circuit.n_qubits)
        object.__setattr__(circuit, "_op_tables", tables)
    return tables


@njit(cache=True)
def _forward(amps, kinds, qubit_a, qubit_b, slots, fixed, params, per_row, n_qubits):
    batch, dim = amps.shape
    for g in range(kinds.shape[0]):
        kind = kinds[g]
        if kind == KIND_CNOT:
            cbit = 1 << (n_qubits - 1 - qubit_a[g])
            tbit = 1 << (n_qubits - 1 - qubit_b[g])
            for b in range(batch):
                for i in range(dim):
                    if (i & cbit) != 0 and (i & tbit) == 0:
                        j = i | tbit
                        tmp = amps[b, i]
                        amps[b, i] = amps[b, j]
                        amps[b, j] = tmp
            continue
        bit = 1 << (n_qubits - 1 - qubit_a[g])
        slot = slots[g]
        for b in range(batch):
            if slot >= 0:
                angle = params[b if per_row else 0, slot]
            else:
                angle = fixed[g]
            half = 0.5 * angle
            if kind == KIND_RZ:
                p0 = np.exp(-1j * half)
                p1 = np.exp(1j * half)
                for i in range(dim):
                    if (i & bit) == 0:
                        amps[b, i] *= p0
                        amps[b, i | bit] *= p1
            else:
                c = np.cos(half)
                s = np.sin(half)
                for i in range(dim):
                    if (i & bit) == 0:
                        j = i | bit
                        a0 = amps[b, i]
                        a1 = amps[b, j]
                        if kind == KIND_RY:
                            amps[b, i] = c * a0 - s * a1
                            amps[b, j] = s * a0 + c * a1
                        else:  # RX
                            amps[b, i] = c * a0 - 1j * s * a1
                            amps[b, j] = -1j * s * a0 + c * a1
    return amps


@njit(cache=True)
def _adjoint_backward(psi, lam, grads, kinds, qubit_a, qubit_b, slots, fixed, params, n_qubits):
    """Walk the gate list backward; grads[b, slot] = Im <lam| P |psi> taken at
    the state just after each parametrized gate, uncomputing as it goes."""
    batch, dim = psi.shape
    for g in range(kinds.shape[0] - 1, -1, -1):
        kind = kinds[g]
        if kind == KIND_CNOT:
            cbit = 1 << (n_qubits - 1 - qubit_a[g])
            tbit = 1 << (n_qubits - 1 - qubit_b[g])
            for b in range(batch):
                for i in range(dim):
                    if (i & cbit) != 0 and (i & tbit) == 0:
                        j = i | tbit
                        tmp = psi[b, i]
                        psi[b, i] = psi[b, j]
                        psi[b, j] = tmp
                        tmp = lam[b, i]
                        lam[b, i] = lam[b, j]
                        lam[b, j] = tmp
            continue
        bit = 1 << (n_qubits - 1 - qubit_a[g])
        slot = slots[g]
        angle = params[slot] if slot >= 0 else fixed[g]
        half = 0.5 * angle
        for b in range(batch):
            if slot >= 0:
                acc = 0.0
                for i in range(dim):
                    if (i & bit) == 0:
                        j = i | bit
                        l0 = np.conj(lam[b, i])
                        l1 = np.conj(lam[b, j])
                        if kind == KIND_RX:
                            z = l0 * psi[b, j] + l1 * psi[b, i]
                        elif kind == KIND_RY:
                            z = -1j * l0 * psi[b, j] + 1j * l1 * psi[b, i]
                        else:  # RZ
                            z = l0 * psi[b, i] - l1 * psi[b, j]
                        acc += z.imag
                grads[b, slot] = acc
            # apply the inverse rotation to both psi and lam
            if kind == KIND_RZ:
                p0 = np.exp(1j * half)
                p1 = np.exp(-1j * half)
                for i in range(dim):
                    if (i & bit) == 0:
                        psi[b, i] *= p0
                        psi[b, i | bit] *= p1
                        lam[b, i] *= p0
                        lam[b, i | bit] *= p1
            else:
                c = np.cos(half)
                s = np.sin(half)
                for i in range(dim):
                    if (i & bit) == 0:
                        j = i | bit
                        a0 = psi[b, i]
                        a1 = psi[b, j]
                        l0 = lam[b, i]
                        l1 = lam[b, j]
                        if kind == KIND_RY:
                            psi[b, i] = c * a0 + s * a1
                            psi[b, j] = -s * a0 + c * a1
                            lam[b, i] = c * l0 + s * l1
                            lam[b, j] = -s * l0 + c * l1
                        else:  # RX
                            psi[b, i] = c * a0 + 1j * s * a1
                            psi[b, j] = 1j * s * a0 + c * a1
                            lam[b, i] = c * l0 + 1j * s * l1
                            lam[b, j] = 1j * s * l0 + c * l1


def forward_compiled(circuit, amps: np.ndarray, params: np.ndarray) -> np.ndarray:
    """In-place batched circuit application via the jitted kernel."""
    kinds, qubit_a, qubit_b, slots, fixed = compiled_tables(circuit)
    params = np.ascontiguousarray(np.atleast_2d(params))
    per_row = params.shape[0] == amps.shape[0] and params.shape[0] > 1
    _forward(amps, kinds, qubit_a, qubit_b, slots, fixed, params, per_row, circuit.n_qubits)
    return amps


def adjoint_backward_compiled(circuit, psi, lam, grads, params):
    kinds, qubit_a, qubit_b, slots, fixed = compiled_tables(circuit)
    _adjoint_backward(
        psi,
        lam,
        grads,
        kinds,
        qubit_a,
        qubit_b,
        slots,
        fixed,
        np.ascontiguousarray(params, dtype=np.float64),
        circuit.n_qubits,
    )
