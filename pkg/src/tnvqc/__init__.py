"""Tensor-network variational quantum circuits on a dense statevector simulator.

Builds TTN / MERA / hardware-efficient parametrized circuits, quantifies
their expressibility and entangling capability, and trains them as
variational classifiers for spin-model phase recognition and pairwise
image classification.
"""

from .analysis import (
    AnalysisReport,
    FidelityHistogram,
    analyze_circuit,
    entangling_capability,
    expressibility,
    haar_fidelity_bin_mass,
    sample_fidelity_histogram,
)
from .ansatz import (
    BLOCK_U,
    BLOCK_V,
    BlockSpec,
    Circuit,
    block_u,
    block_v,
    build_hardware_efficient,
    build_mera,
    build_ttn,
    circuit_to_text,
    run_ansatz,
    run_ansatz_batch,
)
from .classify import (
    Pipeline,
    ReadoutSpec,
    SplitSpec,
    decode_image_probs,
    decode_phase_probs,
    evaluate,
    pairwise_image_pipeline,
    phase_pipeline,
    phase_readout_pair,
    split_dataset,
)
from .dataio import (
    EncodedImage,
    FormatError,
    ImageRecord,
    load_dataset,
    load_idx,
    preprocess,
    save_dataset,
    write_results,
)
from .engine import (
    AdamState,
    EnergyLoss,
    SingleZReadoutLoss,
    TrainConfig,
    TrainReport,
    TwoQubitReadoutLoss,
    VqeConfig,
    adam_init,
    adam_step,
    cross_entropy,
    finite_difference_gradient,
    parameter_shift_gradient,
    train,
    vqe_ground_state,
)
from .sim import (
    Gate,
    State,
    amplitude_encode,
    apply_gate,
    expectation_hamiltonian,
    expectation_z,
    expectation_zz,
    fidelity,
    new_state,
    reduced_density_single,
    two_qubit_basis_probs,
)
from .spin import (
    Hamiltonian,
    Lattice,
    PhaseDataset,
    PhaseRecord,
    build_lattice,
    build_tfim,
    build_xxz,
    dense_matrix,
    generate_phase_dataset,
    ground_state_ed,
    phase_label,
)

__version__ = "0.1.0"
