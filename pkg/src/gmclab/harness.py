"""Reproducible experiment runner: seeding, worker pool, persistence.

Determinism contract: ``(config, master_seed)`` fully determines the record
stream and the aggregate report, independent of the worker count.  Every
replica owns a Philox generator keyed by a splitmix-mixed seed; records are
flushed in replica order; aggregation happens once, in the parent, over
index-sorted payloads with fixed-tree summation inside the aggregators.
"""

from __future__ import annotations

import configparser
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .errors import ConfigError, GmcLabError
from .experiments import get_experiment, experiment_names

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15  # odd multiplicative constant


def splitmix64(state: int) -> int:
    """One splitmix64 avalanche step (finalizer only)."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def seed_for_replica(master: int, index: int) -> int:
    """Derive the 64-bit seed of replica ``index`` from the master seed.

    Mixes ``master XOR index * golden`` through the splitmix64 finalizer;
    pure integer arithmetic, identical on every platform.
    """
    if index < 0:
        raise ValueError("index must be nonnegative")
    return splitmix64((master ^ ((index * _GOLDEN) & _MASK64)) & _MASK64)


def rng_for_seed(seed: int) -> np.random.Generator:
    """Counter-based generator for one replica (Philox keyed by the seed)."""
    return np.random.Generator(np.random.Philox(key=seed))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_BASE_KEYS = {
    "gamma_sq": float,
    "grid_m": int,
    "n_modes": int,
    "n_max": int,
    "replicas": int,
    "master_seed": int,
    "workers": int,
    "output_path": str,
}

_DEFAULTS = {"replicas": 1, "master_seed": 0, "workers": 1, "output_path": ""}


@dataclass
class RunConfig:
    """Parameters of one experiment run (plus experiment-specific extras)."""

    experiment: str
    gamma_sq: float
    grid_m: int
    n_modes: int
    n_max: int
    replicas: int = 1
    master_seed: int = 0
    workers: int = 1
    output_path: str = ""
    extras: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        _, _, allowed_extras = get_experiment(self.experiment)
        if not 0.0 <= self.gamma_sq < 2.0:
            raise ConfigError(f"gamma_sq must lie in [0, 2), got {self.gamma_sq}")
        if self.grid_m < 2 or self.grid_m & (self.grid_m - 1):
            raise ConfigError(f"grid_m must be a power of two >= 2, got {self.grid_m}")
        if not 1 <= self.n_modes <= self.grid_m // 2:
            raise ConfigError("n_modes must be in [1, grid_m/2]")
        if not 1 <= self.n_max <= self.grid_m // 2:
            raise ConfigError("n_max must be in [1, grid_m/2]")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.master_seed <= _MASK64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        unknown = set(self.extras) - allowed_extras
        if unknown:
            raise ConfigError(
                f"unknown keys for experiment {self.experiment!r}: {sorted(unknown)}")
        return self


def load_config(path, experiment: str | None = None) -> RunConfig:
    """Parse a ``key = value`` config file with one section per experiment."""
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")
    sections = parser.sections()
    if experiment is None:
        if len(sections) != 1:
            raise ConfigError(f"config must have exactly one section, found {sections}")
        experiment = sections[0]
    if experiment not in sections:
        raise ConfigError(f"config has no [{experiment}] section (found {sections})")
    if experiment not in experiment_names():
        raise ConfigError(f"unknown experiment {experiment!r}")

    raw = dict(parser[experiment])
    kwargs = dict(_DEFAULTS)
    extras = {}
    for key, value in raw.items():
        if key in _BASE_KEYS:
            try:
                kwargs[key] = _BASE_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        else:
            extras[key] = value
    missing = {"gamma_sq", "grid_m", "n_modes", "n_max"} - set(kwargs)
    if missing:
        raise ConfigError(f"missing required keys: {sorted(missing)}")
    return RunConfig(experiment=experiment, extras=extras, **kwargs).validate()


# ---------------------------------------------------------------------------
# records and persistence
# ---------------------------------------------------------------------------

@dataclass
class ResultRecord:
    replica_index: int
    seed: int
    payload: dict
    wall_time_ms: int


def write_results(path, records) -> None:
    """Write records as JSON lines (floats use Python's shortest round-trip
    decimal form, at most 17 significant digits, so reads are bit-exact)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": "gmclab-records", "version": __version__}) + "\n")
        for rec in records:
            fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")


def read_results(path):
    """Read a JSON-lines record file back into ResultRecord objects."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            if lineno == 1 and obj.get("format") == "gmclab-records":
                continue
            try:
                records.append(ResultRecord(
                    replica_index=int(obj["replica_index"]),
                    seed=int(obj["seed"]),
                    payload=obj["payload"],
                    wall_time_ms=int(obj["wall_time_ms"]),
                ))
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"{path}: bad record on line {lineno}: {exc}") from exc
    return records


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def _run_one(config: RunConfig, index: int):
    """Execute one replica; returns (index, seed, payload-or-None, error, ms)."""
    seed = seed_for_replica(config.master_seed, index)
    rng = rng_for_seed(seed)

    def sub_rngs(stream: int) -> np.random.Generator:
        return rng_for_seed(seed_for_replica(seed, stream))

    replica_fn, _, _ = get_experiment(config.experiment)
    start = time.perf_counter()
    try:
        payload = replica_fn(config, rng, sub_rngs)
        err = None
    except Exception as exc:  # capture per-replica failure, do not kill the run
        payload, err = None, f"{type(exc).__name__}: {exc}"
    ms = int(round((time.perf_counter() - start) * 1000))
    return index, seed, payload, err, ms


def _worker(args):
    config, index = args
    return _run_one(config, index)


def run_experiment(config: RunConfig) -> dict:
    """Run all replicas, stream records to ``output_path``, and aggregate.

    Records are flushed to disk in replica order as soon as contiguous
    results are available, so a late failure never corrupts earlier records.
    Failed replicas are listed in the report's failure manifest and skipped
    by the aggregator.  The aggregate report does not depend on the worker
    count.
    """
    config.validate()
    indices = range(config.replicas)

    if config.workers == 1:
        results = (_run_one(config, i) for i in indices)
    else:
        pool = ProcessPoolExecutor(max_workers=config.workers)
        results = pool.map(_worker, [(config, i) for i in indices], chunksize=8)

    out = open(config.output_path, "w", encoding="utf-8") if config.output_path else None
    if out:
        out.write(json.dumps({"format": "gmclab-records", "version": __version__}) + "\n")

    buffered = {}
    next_to_flush = 0
    payloads = {}
    failures = []
    try:
        for index, seed, payload, err, ms in results:
            if err is None:
                payloads[index] = payload
            else:
                failures.append({"replica_index": index, "seed": seed, "error": err})
            if out:
                buffered[index] = ResultRecord(index, seed, payload if err is None else
                                               {"error": err}, ms)
                while next_to_flush in buffered:
                    out.write(json.dumps(asdict(buffered.pop(next_to_flush)),
                                         sort_keys=True) + "\n")
                    out.flush()
                    next_to_flush += 1
    finally:
        if out:
            out.close()
        if config.workers > 1:
            pool.shutdown()

    ordered = [payloads[i] for i in sorted(payloads)]
    if not ordered:
        raise GmcLabError("all replicas failed; nothing to aggregate")
    _, aggregate_fn, _ = get_experiment(config.experiment)
    report = {
        "experiment": config.experiment,
        "config": {k: v for k, v in asdict(config).items()
                   if k not in ("workers", "output_path")},
        "version": __version__,
        "replicas_succeeded": len(ordered),
        "failures": failures,
        "aggregate": aggregate_fn(config, ordered),
    }
    return report
