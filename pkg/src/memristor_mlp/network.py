"""Feed-forward perceptron backed by plain numbers or by memristor pairs.

Layer ``l`` holds a weight matrix of shape ``(n_out, n_in)`` (row = neuron)
and a threshold vector of length ``n_out``. A neuron computes
``S = theta + sum(w * x)`` and emits ``F(S)``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuit import (
    ActivationTable,
    ComplementaryPair,
    NeuronCircuit,
    TanhActivation,
    check_safe_inputs,
    layer_summing_outputs,
)
from .dataset import Label
from .device import CalibrationCurve, DeviceState, OxideProfile
from .errors import BudgetExceeded, DimensionMismatch


class Backing(str, enum.Enum):
    SOFTWARE = "software"
    DEVICE = "device"


@dataclass(frozen=True)
class Topology:
    n_inputs: int = 4
    hidden: tuple = (2,)
    n_outputs: int = 1
    pair_budget: int = 16

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        self.validate()

    @property
    def layer_sizes(self) -> tuple:
        return (self.n_inputs, *self.hidden, self.n_outputs)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def pairs_needed(self) -> int:
        """One pair per connection plus one threshold pair per neuron."""
        sizes = self.layer_sizes
        return sum((fan_in + 1) * n for fan_in, n in zip(sizes[:-1], sizes[1:]))

    @property
    def devices_needed(self) -> int:
        return 2 * self.pairs_needed

    def validate(self) -> None:
        if min(self.layer_sizes) < 1:
            raise DimensionMismatch(f"every layer needs at least one unit: {self.layer_sizes}")
        if not self.hidden:
            raise DimensionMismatch("a double-layer perceptron needs at least one hidden layer")
        if self.pairs_needed > self.pair_budget:
            raise BudgetExceeded(
                f"topology {self.layer_sizes} needs {self.pairs_needed} pairs, "
                f"budget is {self.pair_budget}"
            )

    def to_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "hidden": list(self.hidden),
            "n_outputs": self.n_outputs,
            "pair_budget": self.pair_budget,
        }


@dataclass
class Perceptron:
    topology: Topology
    weights: list
    thresholds: list
    activation: object = field(default_factory=ActivationTable.tanh)
    circuits: Optional[list] = None

    def __post_init__(self):
        self.weights = [np.array(w, dtype=float) for w in self.weights]
        self.thresholds = [np.array(t, dtype=float).reshape(-1) for t in self.thresholds]
        sizes = self.topology.layer_sizes
        if len(self.weights) != self.topology.n_layers or len(self.thresholds) != self.topology.n_layers:
            raise DimensionMismatch("need one weight matrix and threshold vector per layer")
        for l, (w, t) in enumerate(zip(self.weights, self.thresholds)):
            if w.shape != (sizes[l + 1], sizes[l]) or t.shape != (sizes[l + 1],):
                raise DimensionMismatch(
                    f"layer {l}: expected weights {(sizes[l + 1], sizes[l])} and "
                    f"thresholds {(sizes[l + 1],)}, got {w.shape} and {t.shape}"
                )

    @property
    def backing(self) -> Backing:
        return Backing.SOFTWARE if self.circuits is None else Backing.DEVICE

    @classmethod
    def zeros(cls, topology: Topology = Topology(), activation=None) -> "Perceptron":
        sizes = topology.layer_sizes
        return cls(
            topology,
            [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
            [np.zeros(o) for o in sizes[1:]],
            ActivationTable.tanh() if activation is None else activation,
        )

    @classmethod
    def from_circuits(cls, topology: Topology, circuits: Sequence[Sequence[NeuronCircuit]],
                      activation=None) -> "Perceptron":
        """Device-backed net whose weights are read off the programmed pairs."""
        circuits = [list(layer) for layer in circuits]
        weights = [np.array([n.weights() for n in layer]) for layer in circuits]
        thresholds = [np.array([n.threshold() for n in layer]) for layer in circuits]
        return cls(topology, weights, thresholds,
                   ActivationTable.tanh() if activation is None else activation, circuits)

    def copy(self) -> "Perceptron":
        return Perceptron(self.topology, [w.copy() for w in self.weights],
                          [t.copy() for t in self.thresholds], self.activation, self.circuits)

    def as_software(self, activation=None) -> "Perceptron":
        net = self.copy()
        net.circuits = None
        if activation is not None:
            net.activation = activation
        return net

    def parameters(self) -> np.ndarray:
        """Flat vector: each layer's weights (row-major) followed by its thresholds."""
        return np.concatenate([np.concatenate([w.ravel(), t]) for w, t in zip(self.weights, self.thresholds)])

    def with_parameters(self, flat) -> "Perceptron":
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.parameters().size:
            raise DimensionMismatch("parameter vector has the wrong length")
        weights, thresholds, k = [], [], 0
        for w, t in zip(self.weights, self.thresholds):
            weights.append(flat[k:k + w.size].reshape(w.shape))
            k += w.size
            thresholds.append(flat[k:k + t.size].copy())
            k += t.size
        return Perceptron(self.topology, weights, thresholds, self.activation)

    def max_abs_weight(self) -> float:
        return max(float(np.max(np.abs(w))) for w in self.weights)

    def max_abs_threshold(self) -> float:
        return max(float(np.max(np.abs(t))) for t in self.thresholds)


@dataclass
class ForwardTrace:
    """Per-layer inputs ``x``, pre-activations ``S`` and outputs ``y``.

    Arrays are 2-D ``(batch, units)``; ``inputs[l]`` feeds layer ``l`` and
    ``inputs[l + 1] is outputs[l]``.
    """

    inputs: list
    pre: list
    post: list

    @property
    def output(self) -> np.ndarray:
        return self.post[-1]


def forward(net: Perceptron, x) -> ForwardTrace:
    """Propagate one input vector or a ``(batch, n_inputs)`` matrix.

    A device-backed net computes every summing node in the voltage domain
    from the programmed resistances.
    """
    X = np.asarray(x, dtype=float)
    X = X.reshape(1, -1) if X.ndim == 1 else X
    if X.ndim != 2 or X.shape[1] != net.topology.n_inputs:
        raise DimensionMismatch(
            f"expected input dimension {net.topology.n_inputs}, got shape {np.shape(x)}"
        )
    check_safe_inputs(X)
    inputs, pre, post = [], [], []
    h = X
    for l in range(net.topology.n_layers):
        inputs.append(h)
        if net.circuits is None:
            s = h @ net.weights[l].T + net.thresholds[l]
        else:
            s = layer_summing_outputs(net.circuits[l], h)
        pre.append(s)
        h = net.activation.activate(s)
        post.append(h)
    return ForwardTrace(inputs, pre, post)


def predict(net: Perceptron, X) -> np.ndarray:
    """Network outputs with shape ``(batch, n_outputs)``."""
    return forward(net, X).output


def label_from_output(y: float) -> Label:
    return Label.CONCAVE if y >= 0 else Label.CONVEX


def classify(net: Perceptron, x) -> Label:
    """CONCAVE when the first output is >= 0, else CONVEX."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("classify takes a single input vector; use classify_batch")
    return label_from_output(float(predict(net, x)[0, 0]))


def classify_batch(net: Perceptron, X) -> list[Label]:
    return [label_from_output(float(y)) for y in predict(net, X)[:, 0]]


def accuracy(net: Perceptron, X, labels: Sequence[Label]) -> float:
    predicted = classify_batch(net, X)
    return sum(p is Label(t) for p, t in zip(predicted, labels)) / len(labels)


def init_random(topology: Topology, rng: np.random.Generator, scale: float = 0.1,
                activation=None) -> Perceptron:
    """Weights and thresholds i.i.d. uniform on [-scale, scale]."""
    if scale < 0:
        raise ValueError(f"scale must be >= 0, got {scale}")
    sizes = topology.layer_sizes
    weights, thresholds = [], []
    for fan_in, n in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.uniform(-scale, scale, (n, fan_in)))
        thresholds.append(rng.uniform(-scale, scale, n))
    return Perceptron(topology, weights, thresholds,
                      ActivationTable.tanh() if activation is None else activation)


# -- serialization -----------------------------------------------------------

def _activation_from_dict(d: dict):
    if d.get("kind") == "tanh":
        return TanhActivation()
    if d.get("kind") == "table":
        if "f" in d:
            return ActivationTable(d["s_min"], d["s_max"], d["f"], d["df"], d.get("name", "custom"))
        return ActivationTable.tanh(d["s_min"], d["s_max"], d["n"])
    raise ValueError(f"unknown activation descriptor {d!r}")


def _device_to_dict(dev: DeviceState) -> dict:
    return {
        "resistance_ohm": dev.resistance,
        "curve": {
            "amplitude_v": dev.curve.amplitudes.tolist(),
            "resistance_ohm": dev.curve.resistances.tolist(),
        },
    }


def _device_from_dict(d: dict, profile: OxideProfile) -> DeviceState:
    curve = CalibrationCurve(d["curve"]["amplitude_v"], d["curve"]["resistance_ohm"])
    return DeviceState(profile, curve, d["resistance_ohm"])


def to_dict(net: Perceptron) -> dict:
    out = {
        "topology": net.topology.to_dict(),
        "weights": [w.tolist() for w in net.weights],
        "thresholds": [t.tolist() for t in net.thresholds],
        "activation": net.activation.describe(),
    }
    if net.circuits is None:
        out["backing"] = {"kind": Backing.SOFTWARE.value}
        return out
    first = net.circuits[0][0]
    layers = []
    for layer in net.circuits:
        neurons = []
        for n in layer:
            neurons.append({
                "pairs": [
                    {"upper": _device_to_dict(p.upper), "lower": _device_to_dict(p.lower)}
                    for p in n.input_pairs
                ],
                "theta_pair": {"upper": _device_to_dict(n.theta_pair.upper),
                               "lower": _device_to_dict(n.theta_pair.lower)},
            })
        layers.append(neurons)
    out["backing"] = {
        "kind": Backing.DEVICE.value,
        "profile": first.theta_pair.profile.to_dict(),
        "r_feedback": first.r_feedback,
        "u_theta": first.u_theta,
        "gain": first.gain,
        "layers": layers,
    }
    return out


def from_dict(d: dict) -> Perceptron:
    topo = d["topology"]
    topology = Topology(topo["n_inputs"], tuple(topo["hidden"]), topo["n_outputs"], topo["pair_budget"])
    activation = _activation_from_dict(d["activation"])
    backing = d.get("backing", {"kind": "software"})
    if backing["kind"] == Backing.SOFTWARE.value:
        return Perceptron(topology, d["weights"], d["thresholds"], activation)
    profile = OxideProfile(**backing["profile"])
    circuits = []
    for layer in backing["layers"]:
        neurons = []
        for n in layer:
            pairs = [ComplementaryPair(_device_from_dict(p["upper"], profile),
                                       _device_from_dict(p["lower"], profile)) for p in n["pairs"]]
            th = ComplementaryPair(_device_from_dict(n["theta_pair"]["upper"], profile),
                                   _device_from_dict(n["theta_pair"]["lower"], profile))
            neurons.append(NeuronCircuit(pairs, th, backing["r_feedback"], backing["u_theta"],
                                         backing["gain"]))
        circuits.append(neurons)
    return Perceptron.from_circuits(topology, circuits, activation)


def to_json(net: Perceptron) -> str:
    return json.dumps(to_dict(net), indent=1, sort_keys=True) + "\n"


def from_json(text: str) -> Perceptron:
    return from_dict(json.loads(text))
