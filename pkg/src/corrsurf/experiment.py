"""End-to-end memory experiments: build, sample both arms, decode, summarise."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .circuit import build_layout, build_memory_circuit
from .decoder import BatchDecoder, build_matching_graph
from .dem import build_dem
from .framesim import iter_chunks
from .marginals import marginalize_catalog
from .noise import NoiseSpec, build_event_catalog

log = logging.getLogger(__name__)

CORRELATED, MARGINALIZED = "correlated", "marginalized"
CSV_FIELDS = ["d", "rounds", "model", "p", "shots", "failures", "p_L", "p_round", "ci_lo", "ci_hi"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    distances: list[int]
    models: dict[str, NoiseSpec]
    rounds: int | str = "two_d"
    basis: str = "Z"
    shots: int = 100_000
    seed: int = 0
    p_sweep: list[float] | None = None
    arms: list[str] = field(default_factory=lambda: [CORRELATED, MARGINALIZED])
    output_dir: str = "out"
    workers: int = 1
    autocorr: bool = False
    name: str = "experiment"

    def __post_init__(self):
        if not self.distances or any(d < 3 or d % 2 == 0 for d in self.distances):
            raise ConfigError(f"distances must be odd and >= 3: {self.distances}")
        if self.rounds != "two_d" and not (isinstance(self.rounds, int) and self.rounds >= 1):
            raise ConfigError(f"rounds must be 'two_d' or a positive integer: {self.rounds!r}")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        bad = set(self.arms) - {CORRELATED, MARGINALIZED}
        if bad:
            raise ConfigError(f"unknown arms {sorted(bad)}")

    def rounds_for(self, d: int) -> int:
        return 2 * d if self.rounds == "two_d" else int(self.rounds)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["models"] = {k: v.to_dict() for k, v in self.models.items()}
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if "models" in raw:
            models = {k: NoiseSpec.from_dict(v) for k, v in raw.pop("models").items()}
        elif "noise" in raw:
            models = {"model": NoiseSpec.from_dict(raw.pop("noise"))}
        else:
            raise ConfigError("config needs 'models' or 'noise'")
        known = set(cls.__dataclass_fields__) - {"models"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "rounds" in raw and raw["rounds"] != "two_d":
            raw["rounds"] = int(raw["rounds"])
        if raw.get("p_sweep") is not None:
            raw["p_sweep"] = [float(p) for p in raw["p_sweep"]]
        return cls(models=models, **raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


@dataclass
class Job:
    d: int
    rounds: int
    basis: str
    model: str
    noise: NoiseSpec
    p: float
    shots: int
    seed: int
    stream: int
    arms: tuple[str, ...]


def _characteristic_p(spec: NoiseSpec) -> float:
    for c in ("class0", "class1", "class2"):
        v = spec.for_class(c)
        if v is not None:
            return float(v.p)
    return 0.0


def run_job(job: Job) -> list[dict]:
    circuit = build_memory_circuit(build_layout(job.d), job.rounds, job.basis)
    catalog = build_event_catalog(circuit, job.noise)
    marginal = marginalize_catalog(circuit, catalog)
    records = []
    if not np.any(marginal.p > 0):
        decoder = None
    else:
        decoder = BatchDecoder(build_matching_graph(build_dem(circuit, marginal)))
    for arm in job.arms:
        noise = catalog if arm == CORRELATED else marginal
        failures = 0
        for chunk in iter_chunks(circuit, noise, job.shots, job.seed,
                                 stream=job.stream * 2 + (arm == MARGINALIZED), workers=1):
            obs = chunk.observable_bits()
            pred = np.zeros_like(obs) if decoder is None else decoder.decode_batch(chunk)
            failures += int(np.count_nonzero(obs != pred))
        records.append(make_record(job.d, job.rounds, f"{job.model}/{arm}", job.p, job.shots, failures))
        log.info("d=%d p=%g %s/%s: %d/%d failures", job.d, job.p, job.model, arm, failures, job.shots)
    return records


def make_record(d, rounds, model, p, shots, failures) -> dict:
    P_L = failures / shots
    lo, hi = analysis.confidence_interval(failures, shots)
    return {
        "d": d,
        "rounds": rounds,
        "model": model,
        "p": p,
        "shots": shots,
        "failures": failures,
        "p_L": P_L,
        "p_round": analysis.per_round_rate(P_L, rounds),
        "ci_lo": analysis.per_round_rate(lo, rounds),
        "ci_hi": analysis.per_round_rate(hi, rounds),
    }


def jobs_for(config: ExperimentConfig) -> list[Job]:
    jobs = []
    for mi, (name, spec) in enumerate(config.models.items()):
        sweep = config.p_sweep or [_characteristic_p(spec)]
        for pi, p in enumerate(sweep):
            noise = spec.scaled(p) if config.p_sweep else spec
            for d in config.distances:
                stream = (mi << 20) | (pi << 8) | d
                jobs.append(Job(d, config.rounds_for(d), config.basis, name, noise, p,
                                config.shots, config.seed, stream, tuple(config.arms)))
    return jobs


def write_csv(records, path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({
                "d": int(row["d"]), "rounds": int(row["rounds"]), "model": row["model"],
                "p": float(row["p"]), "shots": int(row["shots"]), "failures": int(row["failures"]),
                "p_L": float(row["p_L"]), "p_round": float(row["p_round"]),
                "ci_lo": float(row["ci_lo"]), "ci_hi": float(row["ci_hi"]),
            })
    return out


def summarize(records) -> dict:
    """Fits, teraquop projections and thresholds per model present in ``records``."""
    out: dict = {}
    models = sorted({r["model"] for r in records})
    for model in models:
        rs = [r for r in records if r["model"] == model]
        entry: dict = {}
        ps = sorted({r["p"] for r in rs})
        if len(ps) == 1:
            pts = [(r["d"], r["p_round"]) for r in rs if r["p_round"] > 0]
            if len(pts) >= 3:
                for kind in (analysis.EXPONENTIAL, analysis.POWERLAW):
                    fr = analysis.fit(pts, kind)
                    entry[kind] = fr.to_dict() | {"teraquop_distance": analysis.teraquop_distance(fr)}
        else:
            curves = {}
            for d in sorted({r["d"] for r in rs}):
                rd = sorted((r for r in rs if r["d"] == d), key=lambda r: r["p"])
                curves[d] = ([r["p"] for r in rd], [r["p_round"] for r in rd])
            if len(curves) >= 2:
                th = analysis.threshold_estimate(curves)
                entry["threshold"] = {
                    "estimate": th.estimate,
                    "spread": th.spread,
                    "crossings": {f"{a}-{b}": v for (a, b), v in th.crossings.items()},
                    "open_intervals": {f"{a}-{b}": v for (a, b), v in th.open_intervals.items()},
                }
        out[model] = entry
    return out


def run_experiment(config: ExperimentConfig, output_dir=None) -> list[dict]:
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs_for(config)
    workers = int(os.environ.get("CORRSURF_WORKERS", config.workers))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_job, jobs))
    else:
        results = [run_job(j) for j in jobs]
    records = [r for rs in results for r in rs]
    write_csv(records, out / "results.csv")
    (out / "summary.json").write_text(json.dumps(summarize(records), indent=2, sort_keys=True, default=_json_default) + "\n")
    (out / "config.yaml").write_text(config.dump())
    if config.autocorr:
        run_autocorr(config, out)
    return records


def run_autocorr(config: ExperimentConfig, out: Path) -> dict:
    from .framesim import sample

    curves = {}
    for mi, (name, spec) in enumerate(config.models.items()):
        for d in config.distances:
            circuit = build_memory_circuit(build_layout(d), config.rounds_for(d), config.basis)
            catalog = build_event_catalog(circuit, spec)
            for arm in config.arms:
                noise = catalog if arm == CORRELATED else marginalize_catalog(circuit, catalog)
                batch = sample(circuit, noise, config.shots, config.seed,
                               stream=(1 << 30) | (mi << 20) | (d << 1) | (arm == MARGINALIZED))
                ac = analysis.autocorrelation(batch, circuit, n_batches=10)
                tag = f"{name}_{arm}_d{d}"
                (out / f"autocorr_{tag}.csv").write_text(ac.to_csv())
                curves[tag] = {"curve": ac.curve, "stderr": ac.curve_stderr}
    (out / "autocorr_curves.json").write_text(json.dumps(curves, indent=2, sort_keys=True) + "\n")
    return curves


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))
