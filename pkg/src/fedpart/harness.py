"""Experiment harness: config loading/validation, single runs, sweeps.

Configs are flat JSON key-value files; unknown keys are rejected. A run
writes one CSV row per round plus a config echo alongside the output, with
all defaults resolved, so loading the echo reproduces an identical run.
All files are written atomically (temp file + rename).

The "floor" of a run is the mean of grad_norm_u + grad_norm_v_hat over the
final min(100, T//5) rounds: the steady-state plateau the theory's noise
terms predict.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import dataio, fedcore
from .objectives import LogisticObjective

QUADRATIC = "quadratic"
LOGISTIC = "logistic_mnist"
OBJECTIVES = (QUADRATIC, LOGISTIC)
PARTITIONS = ("iid", "by_label")
SWEEP_AXES = ("gamma", "m", "K")

CSV_HEADER = "t,f_value,grad_norm_u,grad_norm_v,grad_norm_v_hat,sampled,wall_ms"


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


@dataclass
class ExperimentConfig:
    """One experiment. `gamma` is the effective-step shorthand: it resolves
    to gamma_u = gamma/eta_u, gamma_v = gamma/eta_v and is cleared after
    resolution; give either gamma or explicit gamma_u/gamma_v, never both.

    Defaults mirror the shipped profile: n=10, m=9, K=25, effective step
    0.001, eta_u = sqrt(m), eta_v = sqrt(n/m). T=2000 is an artifact choice.
    """

    algorithm: str = fedcore.FEDAVG_P
    objective: str = QUADRATIC
    n: int = 10
    m: int = 9
    K: int = 25
    T: int = 2000
    gamma: float | None = None
    gamma_u: float | None = None
    gamma_v: float | None = None
    eta_u: float | None = None
    eta_v: float | None = None
    seed: int = 0
    batch_size: int = 1
    rho: float = 0.01
    d_u: int | None = None
    d_v: int | None = None
    spread: float = 1.0
    sigma_u: float = 0.0
    sigma_v: float = 0.0
    images_path: str | None = None
    labels_path: str | None = None
    partition: str = "by_label"
    per_client_cap: int = 1000
    output: str = "trace.csv"

    def __post_init__(self):
        self._check_enums()
        self._check_ints()
        if self.n < 1:
            raise ValidationError("n", "n >= 1 required")
        if self.m < 1:
            raise ValidationError("m", "m >= 1 required")
        if self.m > self.n:
            raise ValidationError("m", "m <= n required")
        if self.K < 1:
            raise ValidationError("K", "K >= 1 required")
        if self.T < 0:
            raise ValidationError("T", "T >= 0 required")
        if self.d_u is None:
            self.d_u = 5 if self.objective == QUADRATIC else 392
        if self.d_v is None:
            self.d_v = 5 if self.objective == QUADRATIC else 784 - self.d_u
        self._resolve_steps()
        self._validate()

    def _check_enums(self):
        if self.algorithm not in fedcore.ALGORITHMS:
            raise ValidationError("algorithm", f"must be one of {fedcore.ALGORITHMS}")
        if self.objective not in OBJECTIVES:
            raise ValidationError("objective", f"must be one of {OBJECTIVES}")
        if self.partition not in PARTITIONS:
            raise ValidationError("partition", f"must be one of {PARTITIONS}")

    def _check_ints(self):
        for name in ("n", "m", "K", "T", "seed", "batch_size", "per_client_cap"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int):
                raise ValidationError(name, f"must be an integer, got {val!r}")

    def _resolve_steps(self):
        if self.gamma is not None and (self.gamma_u is not None or self.gamma_v is not None):
            raise ValidationError("gamma", "give gamma or gamma_u/gamma_v, not both")
        if (self.gamma_u is None) != (self.gamma_v is None):
            raise ValidationError("gamma_u", "gamma_u and gamma_v must be given together")
        if self.eta_u is None:
            self.eta_u = math.sqrt(self.m)
        if self.eta_v is None:
            self.eta_v = math.sqrt(self.n / self.m)
        self.eta_u = float(self.eta_u)
        self.eta_v = float(self.eta_v)
        if self.gamma_u is None:
            base = 0.001 if self.gamma is None else float(self.gamma)
            if base <= 0:
                raise ValidationError("gamma", "must be > 0")
            self.gamma_u = base / self.eta_u
            self.gamma_v = base / self.eta_v
        self.gamma_u = float(self.gamma_u)
        self.gamma_v = float(self.gamma_v)
        self.gamma = None

    def _validate(self):
        for name in ("gamma_u", "gamma_v", "eta_u", "eta_v"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be > 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size", "batch_size >= 1 required")
        if self.rho < 0:
            raise ValidationError("rho", "rho >= 0 required")
        if self.d_u < 1 or self.d_v < 1:
            raise ValidationError("d_u", "d_u and d_v must be >= 1")
        for name in ("spread", "sigma_u", "sigma_v"):
            if getattr(self, name) < 0:
                raise ValidationError(name, "must be >= 0")
        if self.per_client_cap < 1:
            raise ValidationError("per_client_cap", "per_client_cap >= 1 required")
        if not self.output:
            raise ValidationError("output", "output path required")
        if self.objective == LOGISTIC:
            if self.d_u + self.d_v != 784:
                raise ValidationError("d_u", f"d_u + d_v must equal 784, got {self.d_u + self.d_v}")
            if not self.images_path or not self.labels_path:
                raise ValidationError("images_path", "logistic_mnist needs images_path and labels_path")

    def to_mapping(self) -> dict:
        """Resolved key-value form; loading it reproduces this config exactly."""
        out = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            out[f.name] = val
        return out

    def hyper_params(self) -> fedcore.HyperParams:
        return fedcore.HyperParams(
            gamma_u=self.gamma_u, gamma_v=self.gamma_v,
            eta_u=self.eta_u, eta_v=self.eta_v,
            K=self.K, T=self.T, m=self.m,
        )


_FIELD_NAMES = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_mapping(raw: dict) -> ExperimentConfig:
    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise UnknownKey(f"unknown config key(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, val in raw.items():
        if isinstance(val, int) and not isinstance(val, bool):
            # json has no int/float distinction a writer can rely on
            f_type = next(f.type for f in dataclasses.fields(ExperimentConfig) if f.name == key)
            if "float" in f_type and key != "seed":
                val = float(val)
        kwargs[key] = val
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    return config_from_mapping(raw)


def _atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(x, ".17g")


def trace_csv_text(traces) -> str:
    lines = [CSV_HEADER]
    for tr in traces:
        sampled = ";".join(str(i) for i in tr.sampled)
        lines.append(
            f"{tr.t},{_fmt(tr.f_value)},{_fmt(tr.grad_norm_u)},{_fmt(tr.grad_norm_v)},"
            f"{_fmt(tr.grad_norm_v_hat)},{sampled},{_fmt(tr.wall_ms)}"
        )
    return "\n".join(lines) + "\n"


def echo_path_for(output: str) -> str:
    base, _ = os.path.splitext(output)
    return base + ".config.json"


def build_oracle(config: ExperimentConfig):
    """Instantiate the configured objective (and its data) for this run."""
    if config.objective == QUADRATIC:
        obj, _ = dataio.synth_quadratic(
            config.n, config.d_u, config.d_v,
            config.spread, config.sigma_u, config.sigma_v, config.seed,
        )
        return obj
    ds = dataio.load_mnist(config.images_path, config.labels_path)
    shards = dataio.partition_clients(
        ds, config.n, config.partition, config.seed, config.d_u, config.d_v
    )
    shards = [dataio.cap_shard(s, config.per_client_cap) for s in shards]
    return LogisticObjective(shards, rho=config.rho, batch_size=config.batch_size)


def run_experiment(config: ExperimentConfig):
    """Run one experiment; write the trace CSV and config echo; return
    (output_path, TrainingResult)."""
    oracle = build_oracle(config)
    result = fedcore.run_training(config.algorithm, oracle, config.hyper_params(), config.seed)
    _atomic_write_text(config.output, trace_csv_text(result.traces))
    _atomic_write_text(
        echo_path_for(config.output),
        json.dumps(config.to_mapping(), indent=2, sort_keys=True) + "\n",
    )
    return config.output, result


def floor_of(traces) -> float:
    """Steady-state level: mean grad_norm_u + grad_norm_v_hat, final window."""
    T = len(traces)
    if T == 0:
        return float("nan")
    window = min(100, max(1, T // 5))
    tail = traces[-window:]
    return float(np.mean([tr.grad_norm_u + tr.grad_norm_v_hat for tr in tail]))


def rounds_to_threshold(traces, threshold: float):
    for tr in traces:
        if tr.grad_norm_u + tr.grad_norm_v_hat <= threshold:
            return tr.t
    return None


@dataclass
class SweepSpec:
    """One-axis sweep over gamma, m or K, crossed with seeds.

    `base` is kept unresolved so per-cell defaults (eta from the cell's m)
    re-derive correctly for each axis value.
    """

    base: dict
    axis: str
    values: list
    seeds: list
    threshold: float | None = None
    out_dir: str = "sweep"

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValidationError("axis", f"must be one of {SWEEP_AXES}")
        if not self.values:
            raise ValidationError("values", "values must be non-empty")
        if not self.seeds:
            raise ValidationError("seeds", "seeds must be non-empty")
        if not isinstance(self.base, dict):
            raise ValidationError("base", "base must be a config mapping")


_SWEEP_KEYS = {"base", "axis", "values", "seeds", "threshold", "out_dir"}


def load_sweep_spec(path: str) -> SweepSpec:
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    unknown = set(raw) - _SWEEP_KEYS
    if unknown:
        raise UnknownKey(f"unknown sweep key(s): {', '.join(sorted(unknown))}")
    if "base" not in raw or "axis" not in raw or "values" not in raw:
        raise ValidationError("base", "sweep needs base, axis and values")
    raw.setdefault("seeds", [raw["base"].get("seed", 0)])
    return SweepSpec(**raw)


def cell_config(spec: SweepSpec, value, seed: int) -> ExperimentConfig:
    raw = dict(spec.base)
    if spec.axis == "gamma":
        raw["gamma"] = value
    elif spec.axis == "m":
        raw["m"] = value
    else:
        raw["K"] = value
    raw["seed"] = seed
    raw["output"] = os.path.join(spec.out_dir, f"{spec.axis}_{value!r}_seed{seed}.csv")
    return config_from_mapping(raw)


def _max_workers(n_cells: int) -> int:
    raw = os.environ.get("FEDPART_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_cells))


def run_sweep(spec: SweepSpec) -> str:
    """Run all (value, seed) cells; write per-cell traces and a summary CSV.

    Summary rows: one per cell plus one aggregate row per axis value
    (seed column "mean"). Cells run in parallel up to FEDPART_THREADS
    workers (0 = auto); rows are emitted in input order regardless of
    completion order, so the summary is deterministic.
    """
    cells = [(value, seed) for value in spec.values for seed in spec.seeds]
    configs = [cell_config(spec, value, seed) for value, seed in cells]

    def one(cfg: ExperimentConfig):
        _, result = run_experiment(cfg)
        return result.traces

    with ThreadPoolExecutor(max_workers=_max_workers(len(cells))) as pool:
        all_traces = list(pool.map(one, configs))

    lines = ["axis,value,seed,floor,rounds_to_threshold,trace_file"]
    by_value: dict = {}
    for (value, seed), cfg, traces in zip(cells, configs, all_traces):
        fl = floor_of(traces)
        thr = spec.threshold if spec.threshold is not None else 2.0 * fl
        rt = rounds_to_threshold(traces, thr)
        by_value.setdefault(value, []).append((fl, rt))
        rt_str = "" if rt is None else str(rt)
        lines.append(f"{spec.axis},{value!r},{seed},{_fmt(fl)},{rt_str},{cfg.output}")
    for value in spec.values:
        rows = by_value[value]
        mean_floor = float(np.mean([fl for fl, _ in rows]))
        hits = [rt for _, rt in rows if rt is not None]
        mean_rt = _fmt(float(np.mean(hits))) if len(hits) == len(rows) else ""
        lines.append(f"{spec.axis},{value!r},mean,{_fmt(mean_floor)},{mean_rt},")

    summary = os.path.join(spec.out_dir, "summary.csv")
    _atomic_write_text(summary, "\n".join(lines) + "\n")
    return summary
