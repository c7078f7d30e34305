"""Lattices, TFIM / XXZ Hamiltonians, exact diagonalization, phase datasets.

Model conventions (J = 1 throughout the experiments):
  TFIM:  H(h) = J * sum_bonds Z Z + h * sum_sites X; 1-D transition at h = J,
         2-D at h ~= 3.01 J.
  XXZ:   H(D) = J * sum_bonds [X X + Y Y + D * Z Z]; transitions at D = +/-1
         (ferromagnetic / paramagnetic / antiferromagnetic).
Open boundary conditions on chain and rectangular lattices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import State, pauli_string_action

MODEL_TFIM = "tfim"
MODEL_XXZ = "xxz"

TFIM_1D_CRITICAL = 1.0
TFIM_2D_CRITICAL = 3.01
XXZ_CRITICAL = (-1.0, 1.0)

# Sweep ranges from the experiments: h in [0, 2J] (1-D TFIM), [0, 6J] (2-D),
# Delta in [-2, 2] (XXZ).  The lower TFIM edge starts slightly above 0 to
# avoid the exactly degenerate zero-field ground space.
_SWEEP_EPS = 1e-3

ED_MAX_QUBITS = 12


@dataclass(frozen=True)
class Lattice:
    kind: str  # "chain" or "rectangular"
    rows: int
    cols: int
    bonds: tuple[tuple[int, int], ...]

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    @property
    def ndim(self) -> int:
        return 1 if self.rows == 1 else 2

    def label(self) -> str:
        return f"{self.rows}x{self.cols}"


def build_lattice(kind: str, rows: int, cols: int) -> Lattice:
    """Open-boundary nearest-neighbor lattice; site index = row * cols + col."""
    if rows < 1 or cols < 1:
        raise ValueError(f"lattice dims must be positive, got {rows}x{cols}")
    if kind == "chain":
        if rows != 1:
            raise ValueError("chain lattice requires rows == 1")
    elif kind != "rectangular":
        raise ValueError(f"unknown lattice kind {kind!r}")
    bonds = []
    for r in range(rows):
        for c in range(cols):
            site = r * cols + c
            if c + 1 < cols:
                bonds.append((site, site + 1))
            if r + 1 < rows:
                bonds.append((site, site + cols))
    return Lattice(kind=kind, rows=rows, cols=cols, bonds=tuple(sorted(bonds)))


@dataclass(frozen=True)
class Hamiltonian:
    """Weighted sum of Pauli strings (per-site letters from I, X, Y, Z)."""

    n_qubits: int
    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        for coeff, string in self.terms:
            if not np.isfinite(coeff):
                raise ValueError(f"non-finite coefficient {coeff}")
            if len(string) != self.n_qubits:
                raise ValueError(
                    f"term {string!r} has length {len(string)}, expected {self.n_qubits}"
                )


def _string_with(n: int, letters: dict[int, str]) -> str:
    return "".join(letters.get(k, "I") for k in range(n))


def build_tfim(lattice: Lattice, coupling: float, field: float) -> Hamiltonian:
    """J * sum_bonds ZZ + h * sum_sites X (X terms kept even at h = 0)."""
    n = lattice.n_sites
    terms = [(coupling, _string_with(n, {i: "Z", j: "Z"})) for i, j in lattice.bonds]
    terms += [(field, _string_with(n, {i: "X"})) for i in range(n)]
    return Hamiltonian(n_qubits=n, terms=tuple(terms))


def build_xxz(lattice: Lattice, coupling: float, anisotropy: float) -> Hamiltonian:
    """J * sum_bonds [XX + YY + Delta * ZZ]."""
    n = lattice.n_sites
    terms = []
    for i, j in lattice.bonds:
        terms.append((coupling, _string_with(n, {i: "X", j: "X"})))
        terms.append((coupling, _string_with(n, {i: "Y", j: "Y"})))
        terms.append((coupling * anisotropy, _string_with(n, {i: "Z", j: "Z"})))
    return Hamiltonian(n_qubits=n, terms=tuple(terms))


def dense_matrix(hamiltonian: Hamiltonian) -> np.ndarray:
    """Full 2^n x 2^n matrix; qubit 0 is the most significant bit.

    Each Pauli string is a signed permutation, so every term fills one entry
    per row; this is equivalent to (but much faster than) summing Kronecker
    products.
    """
    dim = 1 << hamiltonian.n_qubits
    out = np.zeros((dim, dim), dtype=np.complex128)
    rows = np.arange(dim)
    for coeff, string in hamiltonian.terms:
        perm, phase = pauli_string_action(hamiltonian.n_qubits, string)
        out[rows, perm] += coeff * phase
    return out


def _fix_global_phase(vec: np.ndarray) -> np.ndarray:
    """Make the first non-negligible amplitude real positive."""
    idx = np.flatnonzero(np.abs(vec) > 1e-12)
    if idx.size:
        a = vec[idx[0]]
        vec = vec * (np.conj(a) / np.abs(a))
    return vec


def ground_state_ed(hamiltonian: Hamiltonian) -> tuple[float, State]:
    """Lowest eigenpair of the dense Hamiltonian matrix.

    Real-symmetric matrices (all models here) take the real eigh path; the
    eigenvector's global phase is fixed so reruns are bit-identical.
    """
    if hamiltonian.n_qubits > ED_MAX_QUBITS:
        raise ValueError(
            f"dense ED is capped at {ED_MAX_QUBITS} qubits, got {hamiltonian.n_qubits}"
        )
    mat = dense_matrix(hamiltonian)
    if np.abs(mat.imag).max() == 0.0:
        vals, vecs = np.linalg.eigh(mat.real)
    else:
        vals, vecs = np.linalg.eigh(mat)
    vec = _fix_global_phase(vecs[:, 0].astype(np.complex128))
    return float(vals[0]), State(hamiltonian.n_qubits, vec)


def n_phase_classes(model: str) -> int:
    if model == MODEL_TFIM:
        return 2
    if model == MODEL_XXZ:
        return 3
    raise ValueError(f"unknown model {model!r}")


def class_intervals(model: str, ndim: int) -> list[tuple[float, float]]:
    """Sweep sub-interval for each class label, in label order."""
    if model == MODEL_TFIM:
        crit = TFIM_1D_CRITICAL if ndim == 1 else TFIM_2D_CRITICAL
        top = 2.0 if ndim == 1 else 6.0
        return [(_SWEEP_EPS, crit), (crit, top)]
    if model == MODEL_XXZ:
        lo, hi = XXZ_CRITICAL
        return [(-2.0, lo), (lo, hi), (hi, 2.0)]
    raise ValueError(f"unknown model {model!r}")


def phase_label(model: str, ndim: int, sweep_value: float) -> int:
    """Class index from the critical points (J = 1 convention)."""
    if model == MODEL_TFIM:
        crit = TFIM_1D_CRITICAL if ndim == 1 else TFIM_2D_CRITICAL
        return 0 if sweep_value < crit else 1
    if model == MODEL_XXZ:
        if sweep_value < XXZ_CRITICAL[0]:
            return 0  # ferromagnetic
        if sweep_value < XXZ_CRITICAL[1]:
            return 1  # paramagnetic
        return 2  # antiferromagnetic
    raise ValueError(f"unknown model {model!r}")


def build_model(model: str, lattice: Lattice, sweep_value: float) -> Hamiltonian:
    if model == MODEL_TFIM:
        return build_tfim(lattice, 1.0, sweep_value)
    if model == MODEL_XXZ:
        return build_xxz(lattice, 1.0, sweep_value)
    raise ValueError(f"unknown model {model!r}")


@dataclass(frozen=True)
class PhaseRecord:
    sweep_value: float
    label: int
    energy: float
    amplitudes: np.ndarray


@dataclass(frozen=True)
class PhaseDataset:
    model: str
    lattice: Lattice
    records: tuple[PhaseRecord, ...]

    @property
    def n_classes(self) -> int:
        return n_phase_classes(self.model)


def generate_phase_dataset(
    model: str, lattice: Lattice, n_points: int, seed: int
) -> PhaseDataset:
    """Labeled ED ground states over a class-balanced sweep.

    Sweep values are drawn uniformly inside each class interval (stratified,
    so classes are balanced to within one record), then records are sorted
    by sweep value.
    """
    n_classes = n_phase_classes(model)
    if n_points < n_classes:
        raise ValueError(f"need at least {n_classes} points, got {n_points}")
    intervals = class_intervals(model, lattice.ndim)
    rng = np.random.default_rng(seed)
    per_class = [n_points // n_classes] * n_classes
    for k in range(n_points % n_classes):
        per_class[k] += 1
    sweep_values = []
    for (lo, hi), count in zip(intervals, per_class):
        sweep_values.append(rng.uniform(lo, hi, size=count))
    values = np.sort(np.concatenate(sweep_values))
    records = []
    for value in values:
        energy, state = ground_state_ed(build_model(model, lattice, float(value)))
        records.append(
            PhaseRecord(
                sweep_value=float(value),
                label=phase_label(model, lattice.ndim, float(value)),
                energy=energy,
                amplitudes=state.amplitudes,
            )
        )
    return PhaseDataset(model=model, lattice=lattice, records=tuple(records))
