"""Flat key=value experiment configuration and the seed-derivation rule.

Every run is driven by one master seed; all component seeds are derived
through numpy's SeedSequence with a fixed role path, so an experiment is
reproducible end to end from the config file alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .langdata import ADDITION_PROBLEMS, ALL_PROBLEMS

# role codes for derive_seed
ROLE_TRAIN_STREAM = 2
ROLE_VAL_STREAM = 3
ROLE_MODEL = 10  # + ensemble member index
ROLE_LONG_STRINGS = 4
ROLE_PERTURB = 5


def derive_seed(master: int, *path: int) -> int:
    """Deterministic per-component seed from the master seed and a role path."""
    return int(np.random.SeedSequence([int(master), *map(int, path)]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    problem: str = "tomita3"
    seed: int = 0
    # network / training
    n_hidden: int = 20
    nu: float = 1.0
    l1: float = 0.0004
    lr: float = 2.5
    clip: float = 0.002
    bptt_steps: int = 25
    epochs: int = 500
    min_epochs: int = 25
    noise_ramp: bool = False
    ramp_end: float = 0.5
    # data
    train_symbols: int = 100_000
    val_symbols: int = 0  # 0 = problem default (100k grammars, 50k addition)
    max_segment: int = 100
    positive_frac: float = 0.0  # share of accepted-string segments in the train stream
    # extraction thresholds
    tau_act: float = 0.5
    tau_sat: float = 0.5
    tau_tight: float = 0.05
    tau_w: float = 0.05
    samples_per_cluster: int = 100
    # stability
    long_length: int = 1_000_000
    long_strings: int = 100
    sigmas: str = "0.05,0.1,0.2"
    trials: int = 1000
    horizon: int = 5
    step_budget: int = 100_000
    # artifacts
    out_dir: str = "runs"

    def __post_init__(self):
        if self.problem not in ALL_PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.val_symbols == 0:
            self.val_symbols = 50_000 if self.problem in ADDITION_PROBLEMS else 100_000

    @property
    def sigma_list(self) -> list[float]:
        return [float(s) for s in self.sigmas.split(",") if s.strip()]

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = int(value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


_CASTS = {int: int, float: float, str: str, bool: lambda s: s.lower() in ("1", "true", "yes")}


def config_from_text(text: str, **overrides) -> ExperimentConfig:
    """Parse a flat key=value config; unknown keys are an error."""
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    types = {f.name: type(getattr(ExperimentConfig(), f.name)) for f in fields(ExperimentConfig)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        kwargs[key] = _CASTS[types[key]](value)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kwargs)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_text(fh.read(), **overrides)
