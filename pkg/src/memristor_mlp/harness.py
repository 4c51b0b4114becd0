"""Command-line experiment driver.

Subcommands: ``synth-devices``, ``train``, ``transfer``, ``eval`` and
``sweep``. Settings come from built-in defaults, then an optional JSON
``--config`` file, then command-line flags. Every random stream is derived
from ``--seed`` and a fixed tag, so re-running a command reproduces its
files byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import dataset, network, programming, training
from .circuit import R_FEEDBACK, U_THETA, default_gain, w_max
from .device import (
    DEFAULT_CURVE_POINTS,
    CalibrationCurve,
    DeviceState,
    OxideKind,
    OxideProfile,
    synth_device_array,
)
from .errors import ConfigError, MemristorMLPError, NonFiniteLoss
from .seeding import derive_rng, derive_seed

log = logging.getLogger("memristor_mlp")

OUTPUT_DIR_ENV = "MEMRISTOR_MLP_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

METRICS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["accuracy", "n_samples", "confusion", "mean_abs_margin", "backing"],
    "additionalProperties": False,
    "properties": {
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "n_samples": {"type": "integer", "minimum": 1},
        "confusion": {
            "type": "object",
            "description": "confusion[true_label][predicted_label] = count",
            "required": ["concave", "convex"],
            "additionalProperties": False,
            "properties": {
                lab: {
                    "type": "object",
                    "required": ["concave", "convex"],
                    "additionalProperties": False,
                    "properties": {
                        "concave": {"type": "integer", "minimum": 0},
                        "convex": {"type": "integer", "minimum": 0},
                    },
                }
                for lab in ("concave", "convex")
            },
        },
        "mean_abs_margin": {"type": "number", "minimum": 0},
        "backing": {"enum": ["software", "device"]},
    },
}


@dataclass
class ExperimentConfig:
    oxide: str = "ZRO2_Y"
    hidden: list = field(default_factory=lambda: [2])
    pair_budget: int = 16
    epsilon: float = 0.1
    max_steps: int = 1000
    batch: str = "FULL_BATCH"
    stop_error: float = 0.05
    init_scale: float = 0.1
    train_per_class: int = 20
    test_per_class: int = 100
    eta: float = 0.25
    sigma: Optional[float] = None
    d2d_sigma: float = 0.05
    n_devices: int = 32
    curve_points: int = DEFAULT_CURVE_POINTS
    verify_iters: int = 0
    trials: int = 0
    finetune_steps: int = 0
    sweep_sigmas: list = field(default_factory=lambda: [0.0, 0.05, 0.15, 0.30])
    jobs: int = 1
    seed: int = 0
    out_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_DIR_ENV, "runs"))

    def validate(self) -> None:
        try:
            OxideKind(self.oxide.upper())
        except ValueError:
            raise ConfigError(f"unknown oxide {self.oxide!r}; choose ZRO2_Y or SIO2") from None
        self.profile()
        topo = self.topology()
        if topo.devices_needed > self.n_devices:
            raise ConfigError(f"topology needs {topo.devices_needed} devices, array has {self.n_devices}")
        self.train_config()
        if self.eta < 0 or self.eta > dataset.ETA_MAX:
            raise ConfigError(f"eta must lie in [0, {dataset.ETA_MAX}] to keep inputs within +-1 V")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ConfigError("sample counts must be positive")
        if self.init_scale < 0:
            raise ConfigError("init_scale must be >= 0")
        for name in ("verify_iters", "trials", "finetune_steps", "d2d_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if any(s < 0 for s in self.sweep_sigmas):
            raise ConfigError("sweep sigmas must be >= 0")

    def profile(self, sigma: Optional[float] = None) -> OxideProfile:
        sigma = self.sigma if sigma is None else sigma
        overrides = {} if sigma is None else {"sigma_pulse": float(sigma)}
        try:
            return OxideProfile.default(self.oxide, **overrides)
        except MemristorMLPError as exc:
            raise ConfigError(str(exc)) from exc

    def topology(self) -> network.Topology:
        try:
            return network.Topology(4, tuple(self.hidden), 1, self.pair_budget)
        except MemristorMLPError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> training.TrainConfig:
        bound = w_max(self.profile(), R_FEEDBACK, default_gain(self.profile(), R_FEEDBACK))
        try:
            return training.TrainConfig(
                epsilon=self.epsilon, max_steps=self.max_steps, w_max=bound,
                theta_max=bound * U_THETA, batch=self.batch.upper(),
                seed=derive_seed(self.seed, "train/order"), stop_error=self.stop_error,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# -- file helpers ------------------------------------------------------------

def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _commit(files: dict) -> None:
    """Write every ``{path: text}`` entry; called only after all work succeeded."""
    for path, text in files.items():
        _write_atomic(Path(path), text)
        log.info("wrote %s", path)


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# -- pipeline pieces -----------------------------------------------------------

def _devices_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) / "devices"


def build_devices(cfg: ExperimentConfig, sigma: Optional[float] = None) -> list:
    profile = cfg.profile(sigma)
    return synth_device_array(profile, cfg.n_devices, derive_rng(cfg.seed, "devices"),
                              cfg.d2d_sigma, cfg.curve_points)


def load_devices(cfg: ExperimentConfig, sigma: Optional[float] = None) -> list:
    """Devices from ``<out>/devices`` when present, otherwise synthesized."""
    ddir = _devices_dir(cfg)
    files = sorted(ddir.glob("device_*.csv")) if ddir.is_dir() else []
    if not files:
        return build_devices(cfg, sigma)
    profile = cfg.profile(sigma)
    return [DeviceState(profile, CalibrationCurve.from_csv(f.read_text()), profile.r_hrs)
            for f in files]


def train_pipeline(cfg: ExperimentConfig):
    """Generate data, initialise and train; returns ``(net, history, train_samples)``."""
    samples = dataset.generate(cfg.train_per_class, cfg.eta, derive_rng(cfg.seed, "dataset/train"))
    X, D = dataset.to_arrays(samples)
    net = network.init_random(cfg.topology(), derive_rng(cfg.seed, "init"), cfg.init_scale)
    net, history = training.train(net, X, D, cfg.train_config())
    return net, history, samples


def test_samples(cfg: ExperimentConfig) -> list:
    return dataset.generate(cfg.test_per_class, cfg.eta, derive_rng(cfg.seed, "dataset/test"))


def evaluate(net: network.Perceptron, samples: list) -> dict:
    X, _ = dataset.to_arrays(samples)
    y = network.predict(net, X)[:, 0]
    predicted = [network.label_from_output(v) for v in y]
    confusion = {t.value: {p.value: 0 for p in dataset.Label} for t in dataset.Label}
    for s, p in zip(samples, predicted):
        confusion[s.label.value][p.value] += 1
    correct = sum(s.label is p for s, p in zip(samples, predicted))
    return {
        "accuracy": correct / len(samples),
        "n_samples": len(samples),
        "confusion": confusion,
        "mean_abs_margin": float(np.mean(np.abs(y))),
        "backing": net.backing.value,
    }


def _transfer_trial(args):
    """One Monte Carlo transfer; module-level so it pickles for process pools."""
    cfg, net_json, sigma, tag, samples = args
    net = network.from_json(net_json)
    devices = load_devices(cfg, sigma)
    dnet, _ = programming.transfer(net, devices, derive_rng(cfg.seed, tag), cfg.verify_iters)
    X, _ = dataset.to_arrays(samples)
    labels = dataset.labels_of(samples)
    return network.accuracy(dnet, X, labels), dnet.max_abs_weight(), dnet.max_abs_threshold()


def _run_trials(cfg: ExperimentConfig, jobs: list) -> list:
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_transfer_trial, jobs))
    return [_transfer_trial(j) for j in jobs]


# -- commands ----------------------------------------------------------------

def cmd_synth(cfg: ExperimentConfig) -> dict:
    devices = build_devices(cfg)
    ddir = _devices_dir(cfg)
    files = {ddir / f"device_{k:02d}.csv": d.curve.to_csv() for k, d in enumerate(devices)}
    files[ddir / "profile.json"] = cfg.profile().to_json()
    return files


def cmd_train(cfg: ExperimentConfig) -> dict:
    net, history, samples = train_pipeline(cfg)
    out = Path(cfg.out_dir)
    log.info("trained %d steps, normalized error %.4g", len(history) - 1, history.final_normalized)
    return {
        out / "network.json": network.to_json(net),
        out / "history.csv": history.to_csv(),
        out / "train_dataset.csv": dataset.to_csv(samples),
    }


def cmd_transfer(cfg: ExperimentConfig, network_path: Optional[str]) -> dict:
    out = Path(cfg.out_dir)
    path = Path(network_path) if network_path else out / "network.json"
    net = network.from_json(path.read_text())
    if net.backing is not network.Backing.SOFTWARE:
        raise ConfigError("transfer expects a software-backed network file")
    devices = load_devices(cfg)
    audit: list = []
    dnet, plan = programming.transfer(net, devices, derive_rng(cfg.seed, "transfer"),
                                      cfg.verify_iters, audit=audit)
    files = {
        out / "device_network.json": network.to_json(dnet),
        out / "program_plan.json": plan.to_json(),
        out / "pulse_audit.csv": programming.audit_to_csv(audit),
    }
    if cfg.finetune_steps > 0:
        samples = dataset.generate(cfg.train_per_class, cfg.eta, derive_rng(cfg.seed, "dataset/train"))
        X, D = dataset.to_arrays(samples)
        tcfg = replace(cfg.train_config(), max_steps=cfg.finetune_steps)
        tuned, hist = programming.finetune_on_device(dnet, X, D, tcfg, derive_rng(cfg.seed, "finetune"),
                                                     cfg.verify_iters)
        files[out / "finetuned_network.json"] = network.to_json(tuned)
        files[out / "finetune_history.csv"] = hist.to_csv()
    if cfg.trials > 0:
        samples = test_samples(cfg)
        X, _ = dataset.to_arrays(samples)
        sw_acc = network.accuracy(net, X, dataset.labels_of(samples))
        jobs = [(cfg, network.to_json(net), None, f"transfer/trial/{t}", samples)
                for t in range(cfg.trials)]
        rows = [(t, sw_acc, acc, sw_acc - acc) for t, (acc, _, _) in enumerate(_run_trials(cfg, jobs))]
        files[out / "transfer_trials.csv"] = _rows_to_csv(
            ["trial", "software_accuracy", "device_accuracy", "accuracy_drop"], rows)
    return files


def cmd_eval(cfg: ExperimentConfig, network_path: Optional[str], dataset_path: Optional[str]) -> dict:
    out = Path(cfg.out_dir)
    path = Path(network_path) if network_path else out / "network.json"
    net = network.from_json(path.read_text())
    samples = dataset.from_csv(Path(dataset_path).read_text()) if dataset_path else test_samples(cfg)
    if not samples:
        raise ConfigError("evaluation dataset is empty")
    return {out / "metrics.json": _dump_json(evaluate(net, samples))}


def cmd_sweep(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.out_dir)
    net, history, _ = train_pipeline(cfg)
    samples = test_samples(cfg)
    X, _ = dataset.to_arrays(samples)
    sw_acc = network.accuracy(net, X, dataset.labels_of(samples))
    trials = max(cfg.trials, 1)
    net_json = network.to_json(net)
    jobs = [(cfg, net_json, float(s), f"sweep/{float(s)!r}/{t}", samples)
            for s in cfg.sweep_sigmas for t in range(trials)]
    results = _run_trials(cfg, jobs)
    rows, summary = [], []
    for k, s in enumerate(cfg.sweep_sigmas):
        accs = [results[k * trials + t][0] for t in range(trials)]
        rows.extend((float(s), t, sw_acc, a, sw_acc - a) for t, a in enumerate(accs))
        summary.append((float(s), trials, sw_acc, float(np.mean(accs)), float(sw_acc - np.mean(accs)),
                        float(np.std(accs))))
    return {
        out / "network.json": net_json,
        out / "history.csv": history.to_csv(),
        out / "sweep.csv": _rows_to_csv(
            ["sigma", "trial", "software_accuracy", "device_accuracy", "accuracy_drop"], rows),
        out / "sweep_summary.csv": _rows_to_csv(
            ["sigma", "trials", "software_accuracy", "mean_device_accuracy", "mean_accuracy_drop",
             "std_device_accuracy"], summary),
    }


# -- argument parsing --------------------------------------------------------

_FLAG_TYPES = {
    "oxide": str, "pair_budget": int, "epsilon": float, "max_steps": int, "batch": str,
    "stop_error": float, "init_scale": float, "train_per_class": int, "test_per_class": int,
    "eta": float, "sigma": float, "d2d_sigma": float, "n_devices": int, "curve_points": int,
    "verify_iters": int, "trials": int, "finetune_steps": int, "jobs": int, "seed": int,
    "out_dir": str,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields")
    common.add_argument("-v", "--verbose", action="store_true")
    for name, typ in _FLAG_TYPES.items():
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ,
                            default=argparse.SUPPRESS)
    common.add_argument("--hidden", type=int, nargs="+", default=argparse.SUPPRESS,
                        help="hidden layer sizes, e.g. --hidden 2")
    common.add_argument("--sweep-sigmas", dest="sweep_sigmas", type=float, nargs="+",
                        default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="memristor-mlp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth-devices", parents=[common], help="write per-device calibration tables")
    sub.add_parser("train", parents=[common], help="train the software model")
    p = sub.add_parser("transfer", parents=[common], help="program a trained net onto devices")
    p.add_argument("--network", help="software network JSON (default: <out>/network.json)")
    p = sub.add_parser("eval", parents=[common], help="accuracy metrics for a network file")
    p.add_argument("--network", help="network JSON (default: <out>/network.json)")
    p.add_argument("--dataset", help="dataset CSV (default: freshly generated test set)")
    sub.add_parser("sweep", parents=[common], help="train, then Monte Carlo transfers over sigma")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in vars(args).items() if k in known})
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "synth-devices":
            files = cmd_synth(cfg)
        elif args.command == "train":
            files = cmd_train(cfg)
        elif args.command == "transfer":
            files = cmd_transfer(cfg, args.network)
        elif args.command == "eval":
            files = cmd_eval(cfg, args.network, args.dataset)
        else:
            files = cmd_sweep(cfg)
        _commit(files)
    except NonFiniteLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MemristorMLPError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


__all__ = ["ExperimentConfig", "METRICS_SCHEMA", "main", "run"]
