"""Compression-rate benchmark: coreset vs uniform sampling vs the whole set.

Every trained parameter is scored by its worst-case risk on the full,
unweighted training distribution, so all methods share one yardstick.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coreset import compute_anchors, sample_coreset, uniform_coreset
from .dataio import (
    Dataset,
    MetricSpec,
    flip_labels,
    load_dataset,
    normalize,
    perturb_gaussian,
    synth_blobs,
)
from .losses import LossModel, lipschitz_estimate
from .wdro import WdroProblem, train, worst_case_risk

DUALCORE = "DualCore"
UNISAMP = "UniSamp"
WHOLE = "Whole"
METHODS = (DUALCORE, UNISAMP, WHOLE)
_METHOD_ID = {WHOLE: 0, DUALCORE: 1, UNISAMP: 2}

RAW_HEADER = "method,c,trial,risk,time_ms,coreset_ms"
SUMMARY_HEADER = "method,c,risk_mean,risk_std,time_mean_ms"


@dataclass(frozen=True)
class BenchConfig:
    dataset: str = "synth"
    label_column: int = -1
    header: bool = False
    n: int = 2000
    m: int = 5
    separation: float = 4.0
    label_noise: float = 0.0
    noise_std: float = 0.0
    flip_rate: float = 0.0
    normalize: bool = True
    loss: str = "logistic"
    sigma: float = 0.3
    gamma: float = 7.0
    norm: str = "l2"
    rates: tuple = tuple(k / 100 for k in range(1, 11))
    trials: int = 50
    methods: tuple = (DUALCORE, UNISAMP, WHOLE)
    seed: int = 0
    steps: int = 200
    eta0: float | None = None
    l_p: float = 10.0
    anchor: str = "zero"
    pilot_steps: int = 100
    timings: bool = False
    threads: int = 1

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if not rates or any(not 0 < r <= 1 for r in rates):
            raise ValueError("compression rates must lie in (0, 1]")
        object.__setattr__(self, "rates", tuple(sorted(rates)))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        methods = tuple(self.methods)
        for mth in methods:
            if mth not in METHODS:
                raise ValueError(f"unknown method {mth!r}; expected a subset of {METHODS}")
        object.__setattr__(self, "methods", methods)
        if self.anchor not in ("zero", "whole", "pilot"):
            raise ValueError("anchor must be 'zero', 'pilot' or 'whole'")

    @classmethod
    def from_mapping(cls, values: dict) -> "BenchConfig":
        """Build from string or typed values; unknown keys are an error."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in fields:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, fields[key].default)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "BenchConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"config line {lineno}: expected key = value")
            values[key.strip()] = val.strip()
        return cls.from_mapping(values)


def _coerce(key, raw, default):
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    if key in ("rates", "methods"):
        items = [s.strip() for s in raw.replace(";", ",").split(",") if s.strip()]
        return tuple(float(s) for s in items) if key == "rates" else tuple(items)
    if key == "eta0":
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


@dataclass(frozen=True)
class BenchRow:
    method: str
    c: float
    trial: int
    risk: float
    wall_time_ms: float
    coreset_build_ms: float


@dataclass(frozen=True)
class SummaryRow:
    method: str
    c: float
    risk_mean: float
    risk_std: float
    time_mean_ms: float
    best: bool = False


def substream(seed: int, *key: int) -> int:
    """Deterministic child seed for ``key`` under ``seed``."""
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(1)[0])


def load_bench_data(config: BenchConfig) -> Dataset:
    """Load or synthesise the training set, then perturb and normalise it."""
    model = LossModel.from_string(config.loss)
    if config.dataset == "synth":
        ds = synth_blobs(config.n, config.m, config.separation, config.label_noise,
                         seed=substream(config.seed, 100))
    else:
        ds = load_dataset(config.dataset, task=model.task, label_column=config.label_column,
                          header=config.header)
    ds = perturb_gaussian(ds, config.noise_std, seed=substream(config.seed, 101))
    if config.flip_rate > 0:
        ds = flip_labels(ds, config.flip_rate, seed=substream(config.seed, 102))
    if config.normalize:
        ds, _ = normalize(ds)
    return ds


def budget_for(c: float, n: int) -> int:
    return min(n, max(1, int(round(c * n))))


def _ms(t0, enabled):
    return (time.perf_counter() - t0) * 1e3 if enabled else math.nan


def run_bench(config: BenchConfig, ds: Dataset | None = None) -> list[BenchRow]:
    """One row per method x rate x trial, in that nesting order."""
    if ds is None:
        ds = load_bench_data(config)
    metric = MetricSpec(config.norm, config.gamma, 1)
    model = LossModel.from_string(config.loss, metric)

    theta_anc = np.zeros(ds.dim)
    if config.anchor != "zero":
        base = WdroProblem.build(ds, model, config.sigma, theta_anc, config.l_p)
        if config.anchor == "pilot":
            pilot = uniform_coreset(ds, budget_for(config.rates[0], ds.n), substream(config.seed, 103))
            base = base.with_coreset(pilot)
        theta_anc = train(base, steps=config.pilot_steps).theta
    anchors = compute_anchors(ds, model, config.sigma, theta_anc, config.l_p)
    full = WdroProblem(ds, model, config.sigma, anchors)
    lipschitz = lipschitz_estimate(model, ds)

    whole = None
    if WHOLE in config.methods:
        t0 = time.perf_counter()
        fit = train(full, steps=config.steps, eta0=config.eta0)
        whole = (worst_case_risk(full, fit.theta).risk, _ms(t0, config.timings))

    def one(task):
        method, r, trial = task
        c = config.rates[r]
        if method == WHOLE:
            return BenchRow(WHOLE, c, trial, whole[0], whole[1], 0.0 if config.timings else math.nan)
        seed = substream(config.seed, _METHOD_ID[method], r, trial)
        s = budget_for(c, ds.n)
        t0 = time.perf_counter()
        if method == DUALCORE:
            cs = sample_coreset(ds, model, config.sigma, anchors, s, seed, lipschitz=lipschitz)
        else:
            cs = uniform_coreset(ds, s, seed)
        build_ms = _ms(t0, config.timings)
        t1 = time.perf_counter()
        fit = train(full.with_coreset(cs), steps=config.steps, eta0=config.eta0)
        risk = worst_case_risk(full, fit.theta).risk
        return BenchRow(method, c, trial, risk, _ms(t1, config.timings), build_ms)

    tasks = [(mth, r, t) for mth in config.methods for r in range(len(config.rates))
             for t in range(config.trials)]
    threads = max(1, int(config.threads))
    if threads == 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, tasks))


def summarize(rows) -> list[SummaryRow]:
    """Mean and sample standard deviation of the risk per ``(method, c)``."""
    groups = {}
    for row in rows:
        groups.setdefault((row.method, row.c), []).append(row)
    out = []
    for (method, c) in sorted(groups):
        risks = np.array([r.risk for r in groups[(method, c)]])
        times = np.array([r.wall_time_ms for r in groups[(method, c)]])
        std = float(np.std(risks, ddof=1)) if risks.size > 1 else 0.0
        out.append(SummaryRow(method, c, float(risks.mean()), std, float(times.mean())))
    best = {}
    for row in out:
        if row.method == WHOLE:
            continue
        if row.c not in best or row.risk_mean < best[row.c].risk_mean:
            best[row.c] = row
    winners = {id(r) for r in best.values()}
    return [dataclasses.replace(r, best=id(r) in winners) for r in out]


def _g(x):
    return f"{x:.6g}"


def format_csv(rows, summary: bool | None = None) -> str:
    rows = list(rows)
    if summary is None:
        summary = bool(rows) and isinstance(rows[0], SummaryRow)
    lines = [SUMMARY_HEADER if summary else RAW_HEADER]
    for r in rows:
        if summary:
            lines.append(f"{r.method},{_g(r.c)},{_g(r.risk_mean)},{_g(r.risk_std)},{_g(r.time_mean_ms)}")
        else:
            lines.append(f"{r.method},{_g(r.c)},{r.trial},{_g(r.risk)},{_g(r.wall_time_ms)},"
                         f"{_g(r.coreset_build_ms)}")
    return "\n".join(lines) + "\n"


def emit_csv(rows, path, summary: bool | None = None) -> None:
    """Write raw rows or a summary as CSV (UTF-8, LF, 6 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_csv(rows, summary))


def format_plotdata(summary) -> str:
    blocks = {}
    for r in summary:
        blocks.setdefault(r.method, []).append(r)
    parts = []
    for method in sorted(blocks):
        lines = [f"# {method}"]
        lines += [f"{_g(r.c)} {_g(r.risk_mean)} {_g(r.risk_std)}" for r in blocks[method]]
        parts.append("\n".join(lines) + "\n")
    return "\n\n".join(parts)


def emit_plotdata(summary, path) -> None:
    """One ``c risk_mean risk_std`` block per method, separated by blank lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_plotdata(summary))


def default_threads() -> int:
    env = os.environ.get("WDRO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
