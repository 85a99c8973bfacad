"""Command-line entry point: ``corrsurf <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .circuit import build_layout, build_memory_circuit, circuit_listing, detector_map
from .decoder import BatchDecoder, build_matching_graph
from .dem import DetectorErrorModel, build_dem
from .experiment import ExperimentConfig, read_csv, run_experiment, _json_default
from .framesim import ShotBatch, sample
from .marginals import marginalize_catalog
from .noise import NoiseSpec, build_event_catalog

log = logging.getLogger("corrsurf")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def load_noise(path: str | None, p: float) -> NoiseSpec:
    """Noise from a YAML file (a bare noise mapping or an experiment config); else standard(p)."""
    if path is None:
        return NoiseSpec.standard(p)
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if "models" in raw:
        raw = next(iter(raw["models"].values()))
    elif "noise" in raw:
        raw = raw["noise"]
    return NoiseSpec.from_dict(raw)


def _circuit(args):
    return build_memory_circuit(build_layout(args.distance), args.rounds, args.basis)


def cmd_circuit(args):
    c = _circuit(args)
    _emit(circuit_listing(c) + "\n" + detector_map(c), args.out)


def cmd_marginals(args):
    c = _circuit(args)
    m = marginalize_catalog(c, build_event_catalog(c, load_noise(args.noise_config, args.p)))
    _emit(m.to_table(), args.out)


def cmd_dem(args):
    c = _circuit(args)
    m = marginalize_catalog(c, build_event_catalog(c, load_noise(args.noise_config, args.p)))
    _emit(build_dem(c, m).to_text(), args.out)


def cmd_sample(args):
    c = _circuit(args)
    catalog = build_event_catalog(c, load_noise(args.noise_config, args.p))
    noise = catalog if args.arm == "correlated" else marginalize_catalog(c, catalog)
    batch = sample(c, noise, args.shots, args.seed, stream=args.stream)
    if args.format == "binary":
        data = batch.to_binary()
        if args.out:
            Path(args.out).write_bytes(data)
        else:
            sys.stdout.buffer.write(data)
    else:
        _emit(batch.to_text(), args.out)


def _read_events(path: str) -> ShotBatch:
    data = Path(path).read_bytes()
    if data[:1] == bytes([0xC5]):
        return ShotBatch.from_binary(data)
    return ShotBatch.from_text(data.decode())


def cmd_decode(args):
    dem = DetectorErrorModel.load(args.dem)
    batch = _read_events(args.events)
    if batch.shots == 0:
        preds = np.zeros(0, np.uint8)
    else:
        if batch.num_detectors != dem.detector_count:
            raise ValueError(f"events have {batch.num_detectors} detectors, DEM has {dem.detector_count}")
        preds = BatchDecoder(build_matching_graph(dem)).decode_batch(batch)
    obs = batch.observable_bits() if batch.shots else np.zeros(0, np.uint8)
    failures = int(np.count_nonzero(obs != preds))
    if args.predictions:
        Path(args.predictions).write_text("".join(f"{int(p)}\n" for p in preds))
    summary = {"shots": batch.shots, "failures": failures,
               "p_L": failures / batch.shots if batch.shots else 0.0}
    rounds = int(dem.metadata.get("rounds", 0)) or None
    if rounds and batch.shots:
        summary["p_round"] = analysis.per_round_rate(summary["p_L"], rounds)
    _emit(json.dumps(summary, indent=2) + "\n", args.out)


def _points(path: str, model: str | None):
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            if model and r.get("model") != model:
                continue
            rows.append((int(r["d"]), float(r["p_round"])))
    return rows


def cmd_analyze(args):
    out: dict = {}
    if args.autocorr:
        c = _circuit(args)
        ac = analysis.autocorrelation(_read_events(args.autocorr), c, n_batches=args.batches)
        out["autocorrelation"] = {"curve": ac.curve, "stderr": ac.curve_stderr,
                                  "zero_variance": ac.zero_variance}
        if args.matrix:
            Path(args.matrix).write_text(ac.to_csv())
    if args.results:
        if args.fit:
            pts = [p for p in _points(args.results, args.model) if p[1] > 0]
            fr = analysis.fit(pts, args.fit)
            tq = analysis.teraquop_distance(fr)
            out["fit"] = fr.to_dict() | {
                "teraquop_distance": tq if tq is not None else "no realistic projection"}
        if args.threshold:
            rows = [r for r in read_csv(args.results) if not args.model or r["model"] == args.model]
            curves = {}
            for d in sorted({r["d"] for r in rows}):
                rd = sorted((r for r in rows if r["d"] == d), key=lambda r: r["p"])
                curves[d] = ([r["p"] for r in rd], [r["p_round"] for r in rd])
            th = analysis.threshold_estimate(curves)
            out["threshold"] = {"estimate": th.estimate, "spread": th.spread,
                                "crossings": {f"{a}-{b}": v for (a, b), v in th.crossings.items()}}
    if not out:
        raise ValueError("nothing to analyze: pass --results with --fit/--threshold, or --autocorr")
    _emit(json.dumps(out, indent=2, default=_json_default) + "\n", args.out)


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config)
    if args.scale != 1.0:
        cfg.shots = max(1, int(round(cfg.shots * args.scale)))
    if args.shots:
        cfg.shots = args.shots
    if args.seed is not None:
        cfg.seed = args.seed
    if args.distance:
        cfg.distances = list(args.distance)
        cfg.__post_init__()
    if args.workers:
        cfg.workers = args.workers
    records = run_experiment(cfg, args.out)
    for r in records:
        log.info("%s d=%d p=%g P_L=%.3e p_round=%.3e", r["model"], r["d"], r["p"], r["p_L"], r["p_round"])
    print(str(Path(args.out or cfg.output_dir) / "results.csv"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corrsurf", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def circuit_args(p, rounds_default=None):
        p.add_argument("--distance", "--d", type=int, required=True)
        p.add_argument("--rounds", type=int, default=rounds_default, required=rounds_default is None)
        p.add_argument("--basis", choices=["Z", "X"], default="Z")

    def noise_args(p):
        p.add_argument("--noise-config", help="YAML noise mapping or experiment config")
        p.add_argument("--p", type=float, default=1e-3, help="standard-noise rate when no config is given")

    p = sub.add_parser("circuit", help="gate listing and detector map")
    circuit_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("marginals", help="marginalized per-location rates")
    circuit_args(p)
    noise_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_marginals)

    p = sub.add_parser("dem", help="detector error model of the marginalized noise")
    circuit_args(p)
    noise_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dem)

    p = sub.add_parser("sample", help="sample detection events")
    circuit_args(p)
    noise_args(p)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--arm", choices=["correlated", "marginalized"], default="correlated")
    p.add_argument("--format", choices=["text", "binary"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decode", help="decode detection events against a DEM")
    p.add_argument("--dem", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--predictions", help="write one prediction per line here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("analyze", help="fits, projections, thresholds, autocorrelations")
    p.add_argument("--results", help="CSV with d and p_round columns")
    p.add_argument("--model", help="restrict to rows with this model label")
    p.add_argument("--fit", choices=[analysis.EXPONENTIAL, analysis.POWERLAW])
    p.add_argument("--threshold", action="store_true")
    p.add_argument("--autocorr", help="detection-event file")
    p.add_argument("--distance", "--d", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--basis", choices=["Z", "X"], default="Z")
    p.add_argument("--batches", type=int, default=10)
    p.add_argument("--matrix", help="write the averaged autocorrelation matrix CSV here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("experiment", help="full pipeline from a YAML config")
    p.add_argument("--config", "--noise-config", dest="config", required=True)
    p.add_argument("--scale", type=float, default=1.0, help="multiply configured shots")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--distance", "--d", type=int, action="append")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # structured report for any module error
        report = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(report) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
