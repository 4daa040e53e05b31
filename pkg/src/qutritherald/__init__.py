"""Heralded entanglement of two distant qutrits stored in atom pairs in leaky cavities."""

from .atom_cavity import (
    DerivedRates,
    NoJumpAmplitudes,
    SystemParams,
    derive_rates,
    emission_state,
    no_jump_amplitudes,
    propagate_numeric,
    survival_probability,
)
from .optics import Detector, PhotonSource, SplitterAngle, detector_amplitude
from .protocol import (
    CascadeResult,
    ClickSequence,
    QutritPairState,
    apply_click,
    encode_qutrits,
    enumerate_outcomes,
    joint_emission_state,
    run_cascade,
    target_state,
    total_probability,
)
from .statespace import Ket, Subsystem, fidelity, inner_product, normalize, tensor_product

__version__ = "0.1.0"

__all__ = [
    "CascadeResult",
    "ClickSequence",
    "DerivedRates",
    "Detector",
    "Ket",
    "NoJumpAmplitudes",
    "PhotonSource",
    "QutritPairState",
    "SplitterAngle",
    "Subsystem",
    "SystemParams",
    "apply_click",
    "derive_rates",
    "detector_amplitude",
    "emission_state",
    "encode_qutrits",
    "enumerate_outcomes",
    "fidelity",
    "inner_product",
    "joint_emission_state",
    "no_jump_amplitudes",
    "normalize",
    "propagate_numeric",
    "run_cascade",
    "survival_probability",
    "target_state",
    "tensor_product",
    "total_probability",
]
