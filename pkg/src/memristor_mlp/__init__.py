"""Simulator of a double-layer perceptron whose weights are complementary
pairs of metal-oxide memristive devices."""

from .circuit import ActivationTable, ComplementaryPair, NeuronCircuit, TanhActivation
from .dataset import Label, Sample
from .device import CalibrationCurve, DeviceState, OxideKind, OxideProfile, PulseCommand
from .kernels import BACKEND
from .network import Perceptron, Topology
from .training import ErrorHistory, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "ActivationTable",
    "BACKEND",
    "CalibrationCurve",
    "ComplementaryPair",
    "DeviceState",
    "ErrorHistory",
    "Label",
    "NeuronCircuit",
    "OxideKind",
    "OxideProfile",
    "Perceptron",
    "PulseCommand",
    "Sample",
    "TanhActivation",
    "Topology",
    "TrainConfig",
]
