"""Moving trained weights onto memristor pairs.

Each device is programmed with a full reset to HRS followed by one SET pulse
whose amplitude comes from the device's own calibration curve. Pairs use an
anchor split: the device on the "wrong" side of the sign is parked at HRS
and the other one carries the whole weight.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .circuit import (
    R_FEEDBACK,
    U_THETA,
    ComplementaryPair,
    NeuronCircuit,
    default_gain,
    weight_window,
)
from .device import (
    PROGRAM_DURATION,
    DeviceState,
    PulseCommand,
    apply_pulse,
    invert_calibration,
    read_current,
)
from .errors import BudgetExceeded, WeightOutOfRange
from .network import Perceptron, forward
from .training import BatchMode, ErrorHistory, TrainConfig, clamp, descent_direction, sample_orders

AUDIT_HEADER = ["pair", "device", "polarity", "amplitude_v", "duration_s", "result_ohm"]


@dataclass(frozen=True)
class PulseRecord:
    pair: int
    device: str
    polarity: str
    amplitude_v: float
    duration_s: float
    result_ohm: float


def audit_to_csv(records: Sequence[PulseRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AUDIT_HEADER)
    for r in records:
        writer.writerow([r.pair, r.device, r.polarity, repr(float(r.amplitude_v)),
                         repr(float(r.duration_s)), repr(float(r.result_ohm))])
    return buf.getvalue()


@dataclass(frozen=True)
class PairPlan:
    index: int
    r_upper: float
    r_lower: float
    amp_upper: Optional[float]
    amp_lower: Optional[float]

    def to_dict(self) -> dict:
        return {
            "pair": self.index,
            "target_upper_ohm": self.r_upper,
            "target_lower_ohm": self.r_lower,
            "set_amplitude_upper_v": self.amp_upper,
            "set_amplitude_lower_v": self.amp_lower,
        }


@dataclass
class ProgramPlan:
    pairs: list = field(default_factory=list)
    verify_iters: int = 0

    def to_json(self) -> str:
        return json.dumps({"verify_iters": self.verify_iters,
                           "pairs": [p.to_dict() for p in self.pairs]},
                          indent=1, sort_keys=True) + "\n"


def pair_w_max(pair: ComplementaryPair, r_feedback: float, gain: float) -> float:
    return gain * weight_window(pair.profile, r_feedback)


def weight_to_resistances(w: float, pair: ComplementaryPair, r_feedback: float = R_FEEDBACK,
                          gain: Optional[float] = None) -> tuple:
    """Target ``(R_upper, R_lower)`` realizing weight ``w`` on ``pair``.

    The device opposite to the sign of ``w`` sits at ``r_hrs``; the other
    takes whatever resistance makes the conductance difference equal ``w``.
    """
    if gain is None:
        gain = default_gain(pair.profile, r_feedback)
    limit = pair_w_max(pair, r_feedback, gain)
    if not abs(w) <= limit * (1 + 1e-12):
        raise WeightOutOfRange(f"|w|={abs(w):.6g} exceeds the pair limit {limit:.6g}")
    r_hrs = pair.profile.r_hrs
    r_lrs = pair.profile.r_lrs
    active = 1.0 / (abs(w) / (gain * r_feedback) + 1.0 / r_hrs)
    active = min(max(active, r_lrs), r_hrs)
    if w >= 0:
        return active, r_hrs
    return r_hrs, active


def _at_hrs(dev: DeviceState, target: float) -> bool:
    return math.isclose(target, dev.profile.r_hrs, rel_tol=1e-12)


def _program_once(dev, target, amplitude, rng, duration, log):
    dev = apply_pulse(dev, PulseCommand.reset(dev.profile, duration), rng)
    log(PulseCommand.reset(dev.profile, duration), dev)
    if amplitude is not None:
        pulse = PulseCommand.set(amplitude, duration)
        dev = apply_pulse(dev, pulse, rng)
        log(pulse, dev)
    return dev


def program_device(dev: DeviceState, target: float, rng: np.random.Generator,
                   verify_iters: int = 0, duration: float = PROGRAM_DURATION,
                   audit: Optional[list] = None, pair_index: int = 0,
                   role: str = "upper") -> DeviceState:
    """Reset ``dev`` then SET it toward ``target``; optionally write-verify.

    With ``verify_iters > 0`` the result is read back and, while its
    relative error exceeds the device's ``sigma_pulse``, the reset+set cycle
    is repeated up to ``verify_iters`` more times. The attempt closest to the
    target is returned.
    """
    amplitude = None if _at_hrs(dev, target) else invert_calibration(dev.curve, target)

    def log(pulse, state):
        if audit is not None:
            audit.append(PulseRecord(pair_index, role, pulse.polarity.value, pulse.amplitude,
                                     pulse.duration, state.resistance))

    best = _program_once(dev, target, amplitude, rng, duration, log)
    if amplitude is None:
        return best

    def rel_err(state):
        measured = state.profile.v_read / read_current(state)
        return abs(measured - target) / target

    best_err = rel_err(best)
    for _ in range(verify_iters):
        if best_err <= dev.profile.sigma_pulse:
            break
        cand = _program_once(best, target, amplitude, rng, duration, log)
        err = rel_err(cand)
        if err < best_err:
            best, best_err = cand, err
    return best


def plan_pair(index: int, pair: ComplementaryPair, targets: tuple) -> PairPlan:
    r_up, r_lo = targets
    amp_up = None if _at_hrs(pair.upper, r_up) else invert_calibration(pair.upper.curve, r_up)
    amp_lo = None if _at_hrs(pair.lower, r_lo) else invert_calibration(pair.lower.curve, r_lo)
    return PairPlan(index, r_up, r_lo, amp_up, amp_lo)


def program_pair(pair: ComplementaryPair, targets: tuple, rng: np.random.Generator,
                 verify_iters: int = 0, audit: Optional[list] = None, pair_index: int = 0,
                 duration: float = PROGRAM_DURATION) -> ComplementaryPair:
    """Program both devices of ``pair`` to ``targets = (R_upper, R_lower)``."""
    r_up, r_lo = targets
    upper = program_device(pair.upper, r_up, rng, verify_iters, duration, audit, pair_index, "upper")
    lower = program_device(pair.lower, r_lo, rng, verify_iters, duration, audit, pair_index, "lower")
    return ComplementaryPair(upper, lower)


@dataclass(frozen=True)
class CircuitParams:
    r_feedback: float = R_FEEDBACK
    u_theta: float = U_THETA
    gain: Optional[float] = None

    def resolved_gain(self, profile) -> float:
        return default_gain(profile, self.r_feedback) if self.gain is None else self.gain


def _pair_targets(net: Perceptron, u_theta: float):
    """Weights to realize, pair by pair: per neuron its inputs, then its threshold."""
    for l, (W, t) in enumerate(zip(net.weights, net.thresholds)):
        for j in range(W.shape[0]):
            for i in range(W.shape[1]):
                yield l, j, i, float(W[j, i])
            yield l, j, None, float(t[j]) / u_theta


def _assemble(net: Perceptron, pairs: list, params: CircuitParams, gain: float) -> Perceptron:
    circuits, k = [], 0
    for W in net.weights:
        layer = []
        for _ in range(W.shape[0]):
            inputs = pairs[k:k + W.shape[1]]
            theta = pairs[k + W.shape[1]]
            k += W.shape[1] + 1
            layer.append(NeuronCircuit(inputs, theta, params.r_feedback, params.u_theta, gain))
        circuits.append(layer)
    return Perceptron.from_circuits(net.topology, circuits, net.activation)


def _program_all(net: Perceptron, pairs: list, rng, verify_iters, params: CircuitParams,
                 audit, plan: Optional[ProgramPlan]) -> Perceptron:
    gain = params.resolved_gain(pairs[0].profile)
    programmed = []
    for k, ((_, _, _, w), pair) in enumerate(zip(_pair_targets(net, params.u_theta), pairs)):
        targets = weight_to_resistances(w, pair, params.r_feedback, gain)
        if plan is not None:
            plan.pairs.append(plan_pair(k, pair, targets))
        programmed.append(program_pair(pair, targets, rng, verify_iters, audit, k))
    return _assemble(net, programmed, params, gain)


def transfer(net: Perceptron, devices: Sequence[DeviceState], rng: np.random.Generator,
             verify_iters: int = 0, params: CircuitParams = CircuitParams(),
             audit: Optional[list] = None) -> tuple:
    """Program a software net onto ``devices``; returns ``(device_net, plan)``.

    Pair ``k`` uses ``devices[2k]`` as its upper and ``devices[2k+1]`` as its
    lower device, assigned neuron by neuron (inputs first, then threshold).

    Raises
    ------
    BudgetExceeded
        Not enough devices for the topology.
    WeightOutOfRange
        A weight or threshold is beyond what a pair can realize.
    """
    n_pairs = net.topology.pairs_needed
    if n_pairs > net.topology.pair_budget or len(devices) < 2 * n_pairs:
        raise BudgetExceeded(f"need {2 * n_pairs} devices, have {len(devices)}")
    pairs = [ComplementaryPair(devices[2 * k], devices[2 * k + 1]) for k in range(n_pairs)]
    plan = ProgramPlan(verify_iters=verify_iters)
    device_net = _program_all(net.as_software(), pairs, rng, verify_iters, params, audit, plan)
    return device_net, plan


def device_pairs(net: Perceptron) -> list:
    """Pairs of a device-backed net in programming order."""
    pairs = []
    for layer in net.circuits:
        for n in layer:
            pairs.extend(n.input_pairs)
            pairs.append(n.theta_pair)
    return pairs


def reprogram(device_net: Perceptron, target: Perceptron, rng: np.random.Generator,
              verify_iters: int = 0, audit: Optional[list] = None) -> Perceptron:
    """Reprogram every pair of ``device_net`` to the weights of ``target``."""
    first = device_net.circuits[0][0]
    params = CircuitParams(first.r_feedback, first.u_theta, first.gain)
    return _program_all(target, device_pairs(device_net), rng, verify_iters, params, audit, None)


def finetune_on_device(device_net: Perceptron, X, D, config: TrainConfig,
                       rng: np.random.Generator, verify_iters: int = 0,
                       audit: Optional[list] = None, on_step=None) -> tuple:
    """Chip-in-the-loop training on an already programmed net.

    Losses and gradients come from the device-backed forward pass using the
    realized weights. Each update is clipped to the weight window and written
    back by reprogramming every pair (reset + set, with device noise).
    Returns ``(device_net, history)``.
    """
    if device_net.circuits is None:
        raise ValueError("finetune_on_device needs a device-backed network")
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float).reshape(X.shape[0], -1)
    wm, tm, eps = config.w_max, config.theta_bound, config.epsilon
    orders = None
    if config.batch is BatchMode.PER_SAMPLE:
        orders = sample_orders(config, X.shape[0])
    net = device_net
    errors, e0 = [], None
    for k in range(config.max_steps + 1):
        trace = forward(net, X)
        r = trace.output - D
        e = 0.5 * float(np.sum(r * r))
        errors.append(e)
        if k > 0 and on_step is not None:
            on_step(k, net, e)
        if k == 0:
            e0 = e
        if k == config.max_steps or e0 == 0 or (k > 0 and e / e0 < config.stop_error):
            break
        batches = [slice(None)] if orders is None else [slice(p, p + 1) for p in orders[k]]
        for b in batches:
            dW, dT, _ = descent_direction(net, X[b], D[b])
            target = net.as_software()
            for w, g in zip(target.weights, dW):
                w += eps * g
            for t, g in zip(target.thresholds, dT):
                t += eps * g
            clamp(target, wm, tm)
            net = reprogram(net, target, rng, verify_iters, audit)
    return net, ErrorHistory(np.array(errors))
