"""Single memristive device: programming response, reads, resets and noise.

Resistances are in ohms and voltages in volts throughout. SET pulses are
negative on the top electrode; their amplitude is stored as a magnitude.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidCurve, InvalidProfile, TargetOutOfRange

#: Truncation bound (in standard deviations) of the pulse-to-pulse noise.
NOISE_TRUNCATION = 3.0
MIN_CURVE_POINTS = 16
DEFAULT_CURVE_POINTS = 41
PROGRAM_DURATION = 5e-3


class OxideKind(str, enum.Enum):
    ZRO2_Y = "ZRO2_Y"
    SIO2 = "SIO2"


class Polarity(str, enum.Enum):
    SET_NEGATIVE = "SET_NEGATIVE"
    RESET_POSITIVE = "RESET_POSITIVE"


@dataclass(frozen=True)
class OxideProfile:
    """Switching parameters of one oxide material.

    ``v_mid`` and ``v_width`` shape the synthetic log-sigmoid response; the
    remaining voltages are the read level, the smallest amplitude that changes
    the state, and the positive amplitude that fully resets to HRS.
    """

    kind: OxideKind
    r_hrs: float
    r_lrs: float
    v_mid: float = 3.5
    v_width: float = 0.3
    v_switch_threshold: float = 2.0
    v_reset: float = 7.0
    v_read: float = 0.5
    sigma_pulse: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "kind", OxideKind(self.kind))
        self.validate()

    def validate(self) -> None:
        if not (0 < self.r_lrs < self.r_hrs):
            raise InvalidProfile(
                f"need 0 < r_lrs < r_hrs, got r_lrs={self.r_lrs}, r_hrs={self.r_hrs}"
            )
        if self.v_width <= 0:
            raise InvalidProfile(f"v_width must be positive, got {self.v_width}")
        if not (self.v_read < self.v_switch_threshold <= self.v_mid - self.v_width):
            raise InvalidProfile(
                "need v_read < v_switch_threshold <= v_mid - v_width so reads never program"
            )
        if self.v_reset <= self.v_switch_threshold:
            raise InvalidProfile("v_reset must exceed v_switch_threshold")
        if self.sigma_pulse < 0:
            raise InvalidProfile(f"sigma_pulse must be >= 0, got {self.sigma_pulse}")

    @classmethod
    def zro2_y(cls, **overrides) -> "OxideProfile":
        params = dict(kind=OxideKind.ZRO2_Y, r_hrs=1e6, r_lrs=1e3, v_mid=3.5, v_width=0.3)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def sio2(cls, **overrides) -> "OxideProfile":
        params = dict(kind=OxideKind.SIO2, r_hrs=1e3, r_lrs=1e2, v_mid=3.5, v_width=0.9)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def default(cls, kind, **overrides) -> "OxideProfile":
        kind = kind if isinstance(kind, OxideKind) else OxideKind(str(kind).upper())
        if kind is OxideKind.ZRO2_Y:
            return cls.zro2_y(**overrides)
        return cls.sio2(**overrides)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "OxideProfile":
        try:
            return cls(**json.loads(text))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidProfile):
                raise
            raise InvalidProfile(f"bad profile JSON: {exc}") from exc


@dataclass(frozen=True, eq=False)
class CalibrationCurve:
    """Monotone table of SET amplitude (V) against programmed resistance (ohm).

    Lookups interpolate linearly in (amplitude, log10 R) space and clamp
    outside the tabulated amplitude range.
    """

    amplitudes: np.ndarray
    resistances: np.ndarray
    _log_r: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float)
        res = np.array(self.resistances, dtype=float)
        if amps.ndim != 1 or amps.shape != res.shape:
            raise InvalidCurve("amplitudes and resistances must be 1-D and equal length")
        if amps.size < MIN_CURVE_POINTS:
            raise InvalidCurve(f"need at least {MIN_CURVE_POINTS} points, got {amps.size}")
        if np.any(res <= 0) or not np.all(np.isfinite(res)):
            raise InvalidCurve("resistances must be positive and finite")
        if np.any(np.diff(amps) <= 0):
            raise InvalidCurve("amplitudes must be strictly increasing")
        if np.any(np.diff(res) >= 0):
            raise InvalidCurve("resistances must be strictly decreasing")
        amps.setflags(write=False)
        res.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "resistances", res)
        log_r = np.log10(res)
        log_r.setflags(write=False)
        object.__setattr__(self, "_log_r", log_r)

    def __len__(self):
        return self.amplitudes.size

    def __eq__(self, other):
        if not isinstance(other, CalibrationCurve):
            return NotImplemented
        return np.array_equal(self.amplitudes, other.amplitudes) and np.array_equal(
            self.resistances, other.resistances
        )

    @property
    def r_hrs(self) -> float:
        return float(self.resistances[0])

    @property
    def r_lrs(self) -> float:
        return float(self.resistances[-1])

    @property
    def max_step(self) -> float:
        """Largest spacing between neighbouring amplitudes."""
        return float(np.max(np.diff(self.amplitudes)))

    def __call__(self, amplitude):
        out = 10.0 ** np.interp(amplitude, self.amplitudes, self._log_r)
        return float(out) if np.ndim(out) == 0 else out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["amplitude_v", "resistance_ohm"])
        for a, r in zip(self.amplitudes, self.resistances):
            writer.writerow([repr(float(a)), repr(float(r))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CalibrationCurve":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames != ["amplitude_v", "resistance_ohm"]:
            raise InvalidCurve(f"unexpected calibration header {reader.fieldnames}")
        rows = [(float(r["amplitude_v"]), float(r["resistance_ohm"])) for r in reader]
        if not rows:
            raise InvalidCurve("empty calibration table")
        amps, res = zip(*rows)
        return cls(np.array(amps), np.array(res))


def log_sigmoid_resistance(profile: OxideProfile, amplitude):
    """Un-clamped synthetic response ``R(V)`` of ``profile``."""
    lo, hi = math.log10(profile.r_lrs), math.log10(profile.r_hrs)
    x = (np.asarray(amplitude, dtype=float) - profile.v_mid) / profile.v_width
    frac = 0.5 * (1.0 + np.tanh(0.5 * x))  # logistic sigmoid, overflow-free
    return 10.0 ** (hi - (hi - lo) * frac)


def synth_calibration(
    profile: OxideProfile, n_points: int = DEFAULT_CURVE_POINTS
) -> CalibrationCurve:
    """Sample the log-sigmoid response uniformly on [v_switch_threshold, v_reset].

    The first and last samples are pinned to ``r_hrs`` and ``r_lrs`` exactly.
    """
    profile.validate()
    if n_points < MIN_CURVE_POINTS:
        raise InvalidCurve(f"n_points must be >= {MIN_CURVE_POINTS}, got {n_points}")
    amps = np.linspace(profile.v_switch_threshold, profile.v_reset, n_points)
    res = log_sigmoid_resistance(profile, amps)
    res[0] = profile.r_hrs
    res[-1] = profile.r_lrs
    return CalibrationCurve(amps, res)


def perturb_profile(
    profile: OxideProfile, rng: np.random.Generator, rel_sigma: float = 0.05
) -> OxideProfile:
    """Device-to-device variation: jitter the transition centre ``v_mid``.

    The jitter is a truncated Gaussian of relative width ``rel_sigma``; draws
    that would let reads or sub-threshold pulses reach the transition are
    clipped so the profile stays valid. Resistance endpoints are kept, so
    every device of one oxide shares the same weight window.
    """
    if rel_sigma < 0:
        raise InvalidProfile("rel_sigma must be >= 0")
    if rel_sigma == 0:
        return profile
    z = float(truncated_normal(rng, ()))
    v_mid = profile.v_mid * (1.0 + rel_sigma * z)
    v_mid = max(v_mid, profile.v_switch_threshold + profile.v_width)
    return replace(profile, v_mid=v_mid)


@dataclass(frozen=True)
class PulseCommand:
    polarity: Polarity
    amplitude: float
    duration: float = PROGRAM_DURATION

    def __post_init__(self):
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        if self.amplitude < 0:
            raise ValueError(f"amplitude is a magnitude and must be >= 0, got {self.amplitude}")
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")

    @classmethod
    def reset(cls, profile: OxideProfile, duration: float = PROGRAM_DURATION) -> "PulseCommand":
        return cls(Polarity.RESET_POSITIVE, profile.v_reset, duration)

    @classmethod
    def set(cls, amplitude: float, duration: float = PROGRAM_DURATION) -> "PulseCommand":
        return cls(Polarity.SET_NEGATIVE, amplitude, duration)


@dataclass(frozen=True)
class DeviceState:
    profile: OxideProfile
    curve: CalibrationCurve
    resistance: float

    def __post_init__(self):
        p, c = self.profile, self.curve
        if not (math.isclose(c.r_hrs, p.r_hrs, rel_tol=1e-12)
                and math.isclose(c.r_lrs, p.r_lrs, rel_tol=1e-12)):
            raise InvalidCurve("calibration endpoints must equal the profile's r_hrs / r_lrs")
        if not (p.r_lrs <= self.resistance <= p.r_hrs):
            raise ValueError(
                f"resistance {self.resistance} outside [{p.r_lrs}, {p.r_hrs}]"
            )

    @classmethod
    def fresh(cls, profile: OxideProfile, curve: Optional[CalibrationCurve] = None) -> "DeviceState":
        """A device sitting in HRS, with the synthetic curve unless one is given."""
        return cls(profile, curve if curve is not None else synth_calibration(profile), profile.r_hrs)


def truncated_normal(rng: np.random.Generator, size, bound: float = NOISE_TRUNCATION):
    """Standard normal draws restricted to [-bound, bound] by resampling."""
    z = rng.standard_normal(size)
    if np.ndim(z) == 0:
        while abs(z) > bound:
            z = rng.standard_normal()
        return z
    bad = np.abs(z) > bound
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > bound
    return z


def programmed_resistance(
    profile: OxideProfile, curve: CalibrationCurve, amplitude, rng: np.random.Generator
):
    """Resistance reached by SET pulse(s) of ``amplitude`` applied from HRS.

    Vectorised over ``amplitude``. Amplitudes below the switching threshold
    return ``r_hrs``; the caller decides whether such a pulse acts at all.
    """
    amplitude = np.asarray(amplitude, dtype=float)
    nominal = np.asarray(curve(amplitude), dtype=float)
    if profile.sigma_pulse > 0:
        nominal = nominal * (1.0 + profile.sigma_pulse * truncated_normal(rng, amplitude.shape))
    out = np.clip(nominal, profile.r_lrs, profile.r_hrs)
    return float(out) if out.ndim == 0 else out


def apply_pulse(state: DeviceState, pulse: PulseCommand, rng: np.random.Generator) -> DeviceState:
    """Return the device state after ``pulse``.

    A positive pulse at or above ``v_reset`` restores HRS exactly. A negative
    pulse at or above the switching threshold programs the curve value with
    multiplicative truncated-Gaussian noise. Everything else (reads,
    sub-threshold pulses, partial positive pulses) leaves the state alone.
    Duration is carried for the audit log only.
    """
    p = state.profile
    if pulse.polarity is Polarity.RESET_POSITIVE:
        if pulse.amplitude >= p.v_reset:
            return replace(state, resistance=p.r_hrs)
        return state
    if pulse.amplitude < p.v_switch_threshold:
        return state
    return replace(state, resistance=programmed_resistance(p, state.curve, pulse.amplitude, rng))


def read_current(state: DeviceState) -> float:
    return state.profile.v_read / state.resistance


def invert_calibration(curve: CalibrationCurve, target: float) -> float:
    """Amplitude whose interpolated curve value equals ``target``.

    Raises :class:`TargetOutOfRange` outside [r_lrs, r_hrs] of the curve.
    """
    lo, hi = curve.r_lrs, curve.r_hrs
    if not (lo * (1 - 1e-12) <= target <= hi * (1 + 1e-12)):
        raise TargetOutOfRange(f"target {target} ohm outside [{lo}, {hi}]")
    # np.interp needs increasing x: walk the table from LRS to HRS.
    return float(np.interp(math.log10(target), curve._log_r[::-1], curve.amplitudes[::-1]))


def synth_device_array(
    profile: OxideProfile,
    n_devices: int,
    rng: np.random.Generator,
    d2d_sigma: float = 0.05,
    n_points: int = DEFAULT_CURVE_POINTS,
) -> list[DeviceState]:
    """``n_devices`` fresh devices, each with its own jittered calibration curve."""
    devices = []
    for _ in range(n_devices):
        dev_profile = perturb_profile(profile, rng, d2d_sigma)
        curve = synth_calibration(dev_profile, n_points)
        devices.append(DeviceState(profile, curve, profile.r_hrs))
    return devices

