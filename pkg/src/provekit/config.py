"""Layered run configuration: defaults < config file < environment < flags."""

from __future__ import annotations

import dataclasses
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field


@dataclass
class RunConfig:
    # sampling / self-correction
    n_samples: int = 32
    max_rounds: int = 2
    tokens_first: int = 30_000
    tokens_total: int = 40_000
    include_error_messages: bool = True
    include_prior_cot: bool = True
    correction_history: str = "all"  # or "latest"
    temperature: float = 1.0
    seed: int = 0
    # workers
    gen_workers: int = 8
    verify_workers: int = 16
    # verification
    verify_timeout: float = 60.0
    verifier_backend: str = "builtin"  # or "subprocess"
    verifier_cmd: str | None = None
    # generation backend
    prover_backend: str = "mock"  # or "http"
    mock_script: str | None = None
    prover_url: str | None = None
    prover_token: str | None = None
    prover_model: str | None = None
    # reporting
    ks: list[int] | None = None
    max_sft_per_statement: int = 2

    _ENV_MAP = {
        "PROVER_URL": "prover_url",
        "PROVER_TOKEN": "prover_token",
        "PROVER_MODEL": "prover_model",
        "VERIFIER_CMD": "verifier_cmd",
        "RUN_SEED": "seed",
    }

    @classmethod
    def resolve(cls, config_file=None, env: dict | None = None,
                overrides: dict | None = None) -> "RunConfig":
        values: dict = {}
        if config_file:
            with open(config_file, "rb") as fh:
                data = tomllib.load(fh)
            # accept both flat keys and a [run] section
            flat = dict(data.get("run", {}))
            flat.update({k: v for k, v in data.items() if not isinstance(v, dict)})
            values.update(flat)
        env = os.environ if env is None else env
        for var, key in cls._ENV_MAP.items():
            if var in env:
                values[key] = env[var]
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})

        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**values)
        cfg.seed = int(cfg.seed)
        return cfg

    def snapshot(self) -> dict:
        """Fully resolved settings, serialized into the run manifest."""
        return dataclasses.asdict(self)

    def default_ks(self) -> list[int]:
        if self.ks:
            return list(self.ks)
        ks = []
        k = 1
        while k <= self.n_samples:
            ks.append(k)
            k *= 2
        if ks[-1] != self.n_samples:
            ks.append(self.n_samples)
        return ks
