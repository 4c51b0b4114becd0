"""Voltage-domain model of one network node.

Each signed weight is a complementary pair of devices: the direct input
drives the upper device and the inverted input the lower one, so the
summing amplifier with feedback resistor ``r_feedback`` sees the
conductance difference. The physical node has two inverting stages (the
summing amplifier and the output limiter); their sign flips cancel, so the
model works with the non-inverted composite throughout.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .device import DeviceState, OxideProfile
from .errors import InvalidCurve, UnsafeInputVoltage

R_FEEDBACK = 300.0
U_THETA = 1.0
SAFE_INPUT_VOLTAGE = 1.0


def weight_window(profile: OxideProfile, r_feedback: float = R_FEEDBACK) -> float:
    """``r_feedback * (1/r_lrs - 1/r_hrs)``: largest pair weight at unit gain."""
    return r_feedback * (1.0 / profile.r_lrs - 1.0 / profile.r_hrs)


def default_gain(profile: OxideProfile, r_feedback: float = R_FEEDBACK) -> float:
    """Gain that maps the extreme achievable pair weight to exactly +-1."""
    return 1.0 / weight_window(profile, r_feedback)


def w_max(profile: OxideProfile, r_feedback: float = R_FEEDBACK, gain: float | None = None) -> float:
    if gain is None:
        gain = default_gain(profile, r_feedback)
    return gain * weight_window(profile, r_feedback)


@dataclass(frozen=True)
class ComplementaryPair:
    upper: DeviceState
    lower: DeviceState

    def __post_init__(self):
        if self.upper.profile.kind is not self.lower.profile.kind:
            raise ValueError("both devices of a pair must use the same oxide")

    @property
    def profile(self) -> OxideProfile:
        return self.upper.profile

    def swapped(self) -> "ComplementaryPair":
        return ComplementaryPair(self.lower, self.upper)


def conductance_weight(r_upper, r_lower, r_feedback: float = R_FEEDBACK, gain: float = 1.0):
    """``gain * r_feedback * (1/r_upper - 1/r_lower)``, vectorised."""
    return gain * r_feedback * (1.0 / np.asarray(r_upper, float) - 1.0 / np.asarray(r_lower, float))


def pair_weight(pair: ComplementaryPair, r_feedback: float = R_FEEDBACK, gain: float = 1.0) -> float:
    return float(conductance_weight(pair.upper.resistance, pair.lower.resistance, r_feedback, gain))


@dataclass(frozen=True)
class NeuronCircuit:
    input_pairs: tuple
    theta_pair: ComplementaryPair
    r_feedback: float = R_FEEDBACK
    u_theta: float = U_THETA
    gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "input_pairs", tuple(self.input_pairs))
        if self.r_feedback <= 0 or self.gain <= 0 or self.u_theta <= 0:
            raise ValueError("r_feedback, gain and u_theta must all be positive")

    @property
    def fan_in(self) -> int:
        return len(self.input_pairs)

    def weights(self) -> np.ndarray:
        return np.array([pair_weight(p, self.r_feedback, self.gain) for p in self.input_pairs])

    def threshold(self) -> float:
        """Contribution of the adjusting input to the summed voltage."""
        return self.u_theta * pair_weight(self.theta_pair, self.r_feedback, self.gain)


def check_safe_inputs(inputs) -> None:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.size and np.max(np.abs(inputs)) > SAFE_INPUT_VOLTAGE * (1 + 1e-12):
        raise UnsafeInputVoltage(
            f"input magnitude {np.max(np.abs(inputs)):.6g} V exceeds the "
            f"{SAFE_INPUT_VOLTAGE} V non-disturbing range"
        )


def summing_output(neuron: NeuronCircuit, inputs: Sequence[float]) -> float:
    """Amplified summing-node voltage for one input vector."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (neuron.fan_in,):
        raise ValueError(f"expected {neuron.fan_in} inputs, got shape {inputs.shape}")
    check_safe_inputs(inputs)
    r_star = neuron.r_feedback
    th = neuron.theta_pair
    total = neuron.u_theta * (1.0 / th.upper.resistance - 1.0 / th.lower.resistance) * r_star
    for u, pair in zip(inputs, neuron.input_pairs):
        total += u * (1.0 / pair.upper.resistance - 1.0 / pair.lower.resistance) * r_star
    return neuron.gain * total


def layer_summing_outputs(neurons: Sequence[NeuronCircuit], inputs: np.ndarray) -> np.ndarray:
    """Summing-node voltages of a whole layer for a batch of input vectors.

    ``inputs`` has shape ``(batch, fan_in)``; returns ``(batch, n_neurons)``.
    Same arithmetic as :func:`summing_output`, evaluated on conductance
    matrices.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    check_safe_inputs(inputs)
    g_up = np.array([[1.0 / p.upper.resistance for p in n.input_pairs] for n in neurons])
    g_lo = np.array([[1.0 / p.lower.resistance for p in n.input_pairs] for n in neurons])
    g_th = np.array([1.0 / n.theta_pair.upper.resistance - 1.0 / n.theta_pair.lower.resistance
                     for n in neurons])
    r_star = np.array([n.r_feedback for n in neurons])
    gain = np.array([n.gain for n in neurons])
    u_theta = np.array([n.u_theta for n in neurons])
    if inputs.shape[1] != g_up.shape[1]:
        raise ValueError(f"expected {g_up.shape[1]} inputs, got {inputs.shape[1]}")
    total = u_theta * g_th * r_star + (inputs @ (g_up - g_lo).T) * r_star
    return gain * total


@dataclass(frozen=True, eq=False)
class ActivationTable:
    """Odd, saturating transfer curve ``F`` and its slope on a uniform grid.

    Evaluation interpolates linearly and clamps outside ``[s_min, s_max]``.
    """

    s_min: float
    s_max: float
    f: np.ndarray
    df: np.ndarray
    name: str = "custom"
    _step: float = field(init=False, repr=False)

    def __post_init__(self):
        f = np.ascontiguousarray(self.f, dtype=float)
        df = np.ascontiguousarray(self.df, dtype=float)
        if f.ndim != 1 or f.shape != df.shape:
            raise InvalidCurve("f and df must be 1-D with equal length")
        if f.size < 1025:
            raise InvalidCurve(f"activation table needs >= 1025 samples, got {f.size}")
        if not self.s_min < self.s_max:
            raise InvalidCurve("need s_min < s_max")
        step = (self.s_max - self.s_min) / (f.size - 1)
        if np.any(np.diff(f) < 0) or np.any(np.abs(f) > 1.0) or np.any(df < 0):
            raise InvalidCurve("F must be monotone, bounded by 1, with non-negative slope")
        if not np.allclose(f, -f[::-1], atol=1e-12, rtol=0):
            raise InvalidCurve("F must be odd-symmetric on a grid symmetric about 0")
        fd = (f[2:] - f[:-2]) / (2 * step)
        if np.max(np.abs(fd - df[1:-1])) > 1e-3:
            raise InvalidCurve("tabulated slope disagrees with the F samples")
        f.setflags(write=False)
        df.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "df", df)
        object.__setattr__(self, "_step", step)

    @property
    def step(self) -> float:
        return self._step

    @property
    def s(self) -> np.ndarray:
        return np.linspace(self.s_min, self.s_max, self.f.size)

    @classmethod
    def tanh(cls, s_min: float = -4.0, s_max: float = 4.0, n: int = 1025) -> "ActivationTable":
        s = np.linspace(s_min, s_max, n)
        f = np.tanh(s)
        return cls(s_min, s_max, f, 1.0 - f * f, "tanh")

    @classmethod
    def hard_clip(cls, limit: float = 1.0, s_min: float = -4.0, s_max: float = 4.0,
                  n: int = 1025) -> "ActivationTable":
        """Piecewise-linear limiter; zero slope once saturated."""
        s = np.linspace(s_min, s_max, n)
        f = np.clip(s, -limit, limit)
        # Centered difference so the slope table stays consistent with F at the knees.
        df = np.gradient(f, s)
        return cls(s_min, s_max, f, df, "hard_clip")

    def activate(self, s):
        return kernels.interp_uniform(self.s_min, self._step, self.f, s)

    def activate_deriv(self, s):
        return kernels.interp_uniform(self.s_min, self._step, self.df, s)

    # Uniform interface shared with TanhActivation.
    __call__ = activate
    deriv = activate_deriv

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["s", "f", "df"])
        for row in zip(self.s, self.f, self.df):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ActivationTable":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["s", "f", "df"]:
            raise InvalidCurve(f"unexpected activation header {reader.fieldnames}")
        data = np.array([[float(r["s"]), float(r["f"]), float(r["df"])] for r in reader])
        s = data[:, 0]
        if not np.allclose(np.diff(s), (s[-1] - s[0]) / (s.size - 1), rtol=1e-9, atol=1e-12):
            raise InvalidCurve("activation table must be equally spaced")
        return cls(float(s[0]), float(s[-1]), data[:, 1], data[:, 2])

    def describe(self) -> dict:
        d = {"kind": "table", "name": self.name, "s_min": self.s_min, "s_max": self.s_max,
             "n": int(self.f.size)}
        if self.name != "tanh":
            d["f"] = self.f.tolist()
            d["df"] = self.df.tolist()
        return d


class TanhActivation:
    """Exact ``tanh``; the smooth reference used by gradient checks."""

    def activate(self, s):
        return np.tanh(s)

    def activate_deriv(self, s):
        t = np.tanh(s)
        return 1.0 - t * t

    __call__ = activate
    deriv = activate_deriv

    def describe(self) -> dict:
        return {"kind": "tanh"}

    def __eq__(self, other):
        return isinstance(other, TanhActivation)

    def __hash__(self):
        return hash("tanh")


def activate(table, s):
    return table.activate(s)


def activate_deriv(table, s):
    return table.activate_deriv(s)
