"""Experiment configuration in INI form.

Example::

    [dataset]
    generator = checkerboard
    seed = 0

    [ansatz]
    qubits = 5
    layers = 8

    [train]
    iterations = 500
    learning_rate = 0.2

    [noise]
    base_survival = off

    [shots]
    shots = exact

    [postprocess]
    strategy = Id-Id-Id

    [svm]
    C = 1.0

    [output]
    directory = out

Unset keys take the defaults below. ``strategy = rank`` ranks every
strategy against the exact kernel and applies the best one.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import math
from dataclasses import dataclass

from .alignment import TrainConfig
from .embedding import AnsatzShape
from .postprocess import Strategy
from .kernel import ShotConfig
from .simulator import NoiseModel

GENERATORS = ("checkerboard", "donuts", "files")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _optional_float(text: str):
    return None if text.strip().lower() in ("off", "none", "") else float(text)


def _optional_int(text: str):
    return None if text.strip().lower() in ("exact", "none", "") else int(text)


def _optional_str(text: str):
    return None if text.strip() == "" else text.strip()


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    # dataset
    generator: str = "checkerboard"
    data_seed: int = 0
    train_path: str | None = None
    test_path: str | None = None
    # ansatz
    qubits: int = 5
    layers: int = 8
    # train
    iterations: int = 500
    learning_rate: float = 0.2
    batch_size: int = 4
    fd_step: float = math.pi / 100
    train_seed: int = 0
    rescale: bool = False
    log_every: int = 0
    untrained_draws: int = 5
    init_seed: int = 0
    # noise; None means noiseless
    base_survival: float | None = None
    # shots; None means exact probabilities
    shots: int | None = None
    shot_seed: int = 0
    # postprocess
    strategy: str = "Id-Id-Id"
    n_mean: int | None = None
    # svm
    C: float = 1.0
    # output
    directory: str = "out"
    decision_grid: bool = False
    threads: int = 1
    # sweep
    sweep_survivals: tuple[float, ...] = (0.95, 0.99)
    sweep_shots: tuple[int, ...] = (256, 4096)
    sweep_points: int = 20

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}, got {self.generator!r}")
        if self.generator == "files" and not (self.train_path and self.test_path):
            raise ValueError("generator 'files' needs train_path and test_path")
        AnsatzShape(self.qubits, self.layers)
        self.train_config()
        if self.base_survival is not None:
            NoiseModel(self.base_survival)
        if self.shots is not None:
            ShotConfig(self.shots, self.shot_seed)
        if self.strategy != "rank":
            Strategy.parse(self.strategy)
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.untrained_draws < 1:
            raise ValueError("untrained_draws must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @property
    def shape(self) -> AnsatzShape:
        return AnsatzShape(self.qubits, self.layers)

    @property
    def noise(self) -> NoiseModel | None:
        return None if self.base_survival is None else NoiseModel(self.base_survival)

    def shot_config(self, measure_diagonal: bool = False) -> ShotConfig | None:
        if self.shots is None:
            return None
        return ShotConfig(self.shots, self.shot_seed, measure_diagonal)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.iterations, self.fd_step,
                           self.train_seed, self.rescale, self.log_every)

    # ---------------------------------------------------------------- file form

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for f in dataclasses.fields(self):
            section, key = _LAYOUT[f.name][:2]
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, key, _fmt(getattr(self, f.name)))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp.read_string(text)
        known = {(s, k): name for name, (s, k, _) in _LAYOUT.items()}
        kwargs = {}
        for section in cp.sections():
            for key, raw in cp.items(section):
                if (section, key) not in known:
                    raise ValueError(f"unknown config key [{section}] {key}")
                name = known[(section, key)]
                kwargs[name] = _LAYOUT[name][2](raw)
        return cls(**kwargs)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_ini())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_ini(fh.read())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_LAYOUT = {
    "generator": ("dataset", "generator", str.strip),
    "data_seed": ("dataset", "seed", int),
    "train_path": ("dataset", "train_path", _optional_str),
    "test_path": ("dataset", "test_path", _optional_str),
    "qubits": ("ansatz", "qubits", int),
    "layers": ("ansatz", "layers", int),
    "iterations": ("train", "iterations", int),
    "learning_rate": ("train", "learning_rate", float),
    "batch_size": ("train", "batch_size", int),
    "fd_step": ("train", "fd_step", float),
    "train_seed": ("train", "seed", int),
    "rescale": ("train", "rescale", _bool),
    "log_every": ("train", "log_every", int),
    "untrained_draws": ("train", "untrained_draws", int),
    "init_seed": ("train", "init_seed", int),
    "base_survival": ("noise", "base_survival", _optional_float),
    "shots": ("shots", "shots", _optional_int),
    "shot_seed": ("shots", "seed", int),
    "strategy": ("postprocess", "strategy", str.strip),
    "n_mean": ("postprocess", "n_mean", lambda t: None if t.strip() == "" else int(t)),
    "C": ("svm", "C", float),
    "directory": ("output", "directory", str.strip),
    "decision_grid": ("output", "decision_grid", _bool),
    "threads": ("output", "threads", int),
    "sweep_survivals": ("sweep", "base_survivals", _floats),
    "sweep_shots": ("sweep", "shots", _ints),
    "sweep_points": ("sweep", "points", int),
}
