"""Command-line front end.

Subcommands ``joint``, ``conditional``, ``scaling-check``, ``sweep`` and
``cache {clear, stat}``.  Every CSV starts with ``# key: value`` metadata
lines; the only line that changes between identical runs is the first,
``# generated: ...``, which carries the timestamp and runtime.  Floats are
written with 17 significant digits, which round-trips IEEE doubles.

Exit codes: 0 success, 2 config error, 3 physics validation error,
4 budget exceeded, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .detectors import DetectorArray, mean_count, scale_array, validate_array
from .errors import (
    BosecountError,
    BudgetExceeded,
    ConfigError,
    DegenerateDetector,
    NegligibleEvidence,
    NoPeaks,
    ParameterError,
    PhysicsError,
)
from .interference import EVIDENCE_FLOOR, NoSolution, conditional, find_peaks, infer_phase
from .kernel.cache import KernelCache
from .kernel.mixture import BackendChoice, expected_mean, mixture_joint, scaling_residual
from .number_stats import NumberDistribution, binomial_thinning

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_PHYSICS, EXIT_BUDGET = 0, 1, 2, 3, 4


def fmt(x) -> str:
    """Round-trip decimal rendering."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


class CsvOut:
    """Writes CSVs with the metadata header convention into one directory."""

    def __init__(self, directory: Path, prefix: str = ""):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.prefix = prefix
        self.written: list[Path] = []

    def write(self, name: str, meta: dict, columns: list[str], rows, runtime: float | None = None) -> Path:
        path = self.directory / f"{self.prefix}{name}.csv"
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        gen = f"# generated: {stamp}" + (f" runtime_s={runtime:.3f}" if runtime is not None else "")
        tmp = path.with_suffix(".csv.tmp")
        with open(tmp, "w", newline="") as fh:
            fh.write(gen + "\n")
            fh.write(f"# bosecount: {__version__}\n")
            for k, v in meta.items():
                fh.write(f"# {k}: {fmt(v)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        os.replace(tmp, path)
        self.written.append(path)
        return path


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Parse a CSV written by :class:`CsvOut` into ``(meta, columns, rows)``."""
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = val
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]


def _source_meta(cfg: ExperimentConfig, sa, sb, array: DetectorArray) -> dict:
    meta = {"source_a": sa.describe(), "source_b": sb.describe(), "n_detectors": len(array)}
    for m, d in enumerate(array, 1):
        meta[f"detector_{m}"] = f"r_aa={fmt(d.r_aa)} r_bb={fmt(d.r_bb)} |r_ab|={fmt(abs(d.r_ab))} theta={fmt(d.theta)}"
    meta["completeness"] = array.completeness.value
    return meta


def _source_mean(d: NumberDistribution) -> float:
    return float(d.pmf @ d.support)


def _joint(cfg: ExperimentConfig, sa, sb, array, cache, threads, given=None):
    return mixture_joint(
        sa, sb, array, cfg.backend, budget=cfg.budget, cache=cache, threads=threads,
        phase_nodes=cfg.phase_nodes, radial_nodes=cfg.radial_nodes,
        tail_tolerance=cfg.tail_tolerance, given=given,
    )


def _conditional(cfg, sa, sb, array, joint, cache, threads):
    cond = cfg.conditioning
    try:
        return conditional(joint, cond.detector_index, cond.count)
    except NegligibleEvidence as exc:
        if exc.nearest is not None:
            raise
        # the sliced joint cannot see other counts; the one-detector marginal can
        single = _joint(cfg, sa, sb, validate_array([array[cond.detector_index - 1]]), cache, threads)
        start, marg = single.table.marginal_array(0)
        ok = np.flatnonzero(marg > EVIDENCE_FLOOR) + start
        if not ok.size:
            raise
        nearest = int(ok[np.argmin(np.abs(ok - cond.count))])
        raise NegligibleEvidence(f"{exc}; nearest supported count is {nearest}", nearest) from None


def _table_rows(table):
    for counts, p in table.items():
        if p != 0.0:
            yield (*counts, p)


def run_joint(cfg: ExperimentConfig, out: CsvOut, cache=None, threads=1):
    t0 = time.perf_counter()
    sa, sb = cfg.build_sources()
    array = cfg.build_array()
    joint = _joint(cfg, sa, sb, array, cache, threads)
    runtime = time.perf_counter() - t0
    M = len(array)
    meta = _source_meta(cfg, sa, sb, array)
    meta["backend"] = joint.table.backend.value
    out.write("joint", meta, [f"n{m}" for m in range(1, M + 1)] + ["probability"], _table_rows(joint.table))
    summary = [("total_mass", joint.table.total_mass), ("backend", joint.table.backend.value)]
    for m in range(1, M + 1):
        summary.append((f"mean_n{m}", joint.table.mean(m - 1)))
        summary.append((f"expected_mean_n{m}", expected_mean(joint, m)))
    out.write("summary", meta, ["key", "value"], summary, runtime=runtime)
    return joint


def _estimate_rows(cfg, sa, sb, array, cond):
    """Mean-field estimate rows; reasons replace values when inversion fails."""
    m = cond.detector_index
    if len(array) != 2:
        return [("status", "unsupported_detector_count")]
    d1, d2 = array[m - 1], array[2 - m]
    try:
        est = infer_phase(cond.count, d1, _source_mean(sa), _source_mean(sb), d2)
    except DegenerateDetector:
        return [("status", "degenerate_detector")]
    if isinstance(est, NoSolution):
        return [("status", "no_solution"), ("cos_value", est.cos_value),
                ("mean_field_low", est.low), ("mean_field_high", est.high)]
    rows = [
        ("status", "ok"),
        ("n1", est.n1),
        ("delta_plus_plus_theta1", est.delta_plus),
        ("delta_minus_plus_theta1", est.delta_minus),
        ("predicted_n2_plus", est.predicted_n2[0]),
        ("predicted_n2_minus", est.predicted_n2[1]),
        ("mean_n1", mean_count(d1, _source_mean(sa), _source_mean(sb))),
        ("mean_n2", mean_count(d2, _source_mean(sa), _source_mean(sb))),
    ]
    # vertical markers: the two mean-field predictions, sorted for plotting
    lo, hi = sorted(est.predicted_n2)
    rows += [("marker_low", lo), ("marker_high", hi)]
    return rows


def _peak_rows(dist, min_mass):
    try:
        rep = find_peaks(dist, min_mass)
    except NoPeaks:
        return None, []
    rows = [
        (i + 1, p.location, p.mass, p.width, w, p.width / w, nar)
        for i, (p, w, nar) in enumerate(zip(rep.peaks, rep.poisson_width_at_peak, rep.narrower_than_poisson))
    ]
    return rep, rows


PEAK_COLUMNS = ["peak", "location", "mass", "width", "poisson_width", "width_ratio", "narrower_than_poisson"]


def run_conditional(cfg: ExperimentConfig, out: CsvOut, cache=None, threads=1):
    cond = cfg.conditioning
    if cond is None:
        raise ConfigError("conditioning: required for the conditional subcommand")
    t0 = time.perf_counter()
    sa, sb = cfg.build_sources()
    array = cfg.build_array()
    if cond.detector_index > len(array):
        raise ConfigError(f"conditioning.detector_index: {cond.detector_index} exceeds {len(array)} detectors")
    if len(array) != 2:
        raise ConfigError("conditional: exactly two detectors are required")
    joint = _joint(cfg, sa, sb, array, cache, threads, given=(cond.detector_index - 1, cond.count))
    dist = _conditional(cfg, sa, sb, array, joint, cache, threads)
    runtime = time.perf_counter() - t0
    target = 3 - cond.detector_index
    meta = _source_meta(cfg, sa, sb, array)
    meta.update({"backend": joint.table.backend.value, "given_detector": cond.detector_index,
                 "given_count": cond.count, "evidence": dist.params["evidence"]})
    out.write("conditional", meta, [f"n{target}", "probability"],
              ((int(n), p) for n, p in zip(dist.support, dist.pmf)), runtime=runtime)
    rep, rows = _peak_rows(dist, cfg.min_mass)
    out.write("peaks", {**meta, "min_mass": cfg.min_mass, "status": "ok" if rep else "washed_out"}, PEAK_COLUMNS, rows)
    out.write("estimate", meta, ["key", "value"], _estimate_rows(cfg, sa, sb, array, cond))
    return dist, rep


def run_scaling_check(cfg: ExperimentConfig, out: CsvOut, cache=None, threads=1):
    if cfg.scaling is None:
        raise ConfigError("scaling: required for the scaling-check subcommand")
    t0 = time.perf_counter()
    sa, sb = cfg.build_sources()
    array = cfg.build_array()
    q, keep = cfg.scaling.q, cfg.scaling.keep_M or len(array)
    if keep > len(array):
        raise ConfigError(f"scaling.keep_M: {keep} exceeds {len(array)} detectors")
    # validate the magnified array before any kernel work
    scale_array(array, q, keep)
    opts = cfg.kernel_options()
    tv, orig, new = scaling_residual(sa, sb, array, q, keep, cache=cache, threads=threads, **opts)
    runtime = time.perf_counter() - t0
    meta = _source_meta(cfg, sa, sb, array)
    meta.update({"q": q, "keep_M": keep})
    out.write("scaling", meta, ["key", "value"], [("total_variation", tv)], runtime=runtime)
    M = len(array)
    out.write("scaling_original", meta, [f"n{m}" for m in range(1, M + 1)] + ["probability"], _table_rows(orig.table))
    out.write("scaling_renormalized", meta, [f"n{m}" for m in range(1, keep + 1)] + ["probability"], _table_rows(new.table))
    return tv


def _paper_pair_params(cfg):
    d = cfg.detectors
    if not isinstance(d, dict):
        raise ConfigError("sweep: this parameter needs the paper_pair detector shorthand")
    return dict(d["paper_pair"])


def _with_source_param(spec, key, value):
    s = dict(spec)
    s[key] = value
    return s


def _rescaled_source(spec, R0, R):
    """Keep ``R * <N>`` fixed when the detector scale moves from ``R0`` to ``R``."""
    fam = spec["family"]
    s = dict(spec)
    if fam == "fock":
        s["n"] = int(round(spec["n"] * R0 / R))
    elif fam in ("poisson", "gamma_p"):
        s["mean"] = spec["mean"] * R0 / R
    elif fam in ("thermal", "photon_added_thermal"):
        s["nbar"] = spec["nbar"] * R0 / R
    else:
        raise ConfigError(f"sweep R: cannot rescale a {fam} source")
    return s


def _point_config(cfg: ExperimentConfig, parameter: str, value: float) -> ExperimentConfig:
    """The config for one sweep point."""
    if parameter == "Q":
        for i, s in enumerate(cfg.sources):
            if s["family"] != "gamma_p":
                raise ConfigError(f"sources[{i}]: sweeping Q needs gamma_p sources")
        return replace(cfg, sources=tuple(_with_source_param(s, "Q", value) for s in cfg.sources))
    if parameter == "dtheta_over_pi":
        pp = _paper_pair_params(cfg)
        pp["dtheta_over_pi"] = value
        return replace(cfg, detectors={"paper_pair": pp})
    if parameter == "R":
        pp = _paper_pair_params(cfg)
        R0 = pp["R"]
        if value == 0:
            # coherent limit: Poisson sources at the configured geometry
            srcs = tuple({"family": "poisson", "mean": _source_mean(s)} for s in cfg.build_sources())
            return replace(cfg, sources=srcs, backend=BackendChoice.COHERENT_QUADRATURE)
        pp["R"] = value
        return replace(cfg, detectors={"paper_pair": pp},
                       sources=tuple(_rescaled_source(s, R0, value) for s in cfg.sources))
    if parameter == "n1":
        c = cfg.conditioning
        return replace(cfg, conditioning=type(c)(c.detector_index, int(round(value))))
    raise ConfigError(f"sweep.parameter: unsupported {parameter!r}")


def _point_conditional(cfg: ExperimentConfig, cache, threads, parameter, value, joint=None):
    """Conditional pmf and peak report for one sweep point."""
    cond = cfg.conditioning
    sa, sb = cfg.build_sources()
    array = cfg.build_array()
    if parameter == "q":
        sa, sb = binomial_thinning(sa, value), binomial_thinning(sb, value)
        array = scale_array(array, value, len(array))
    if joint is None:
        joint = _joint(cfg, sa, sb, array, cache, threads, given=(cond.detector_index - 1, cond.count))
    dist = _conditional(cfg, sa, sb, array, joint, cache, threads)
    try:
        rep = find_peaks(dist, cfg.min_mass)
    except NoPeaks:
        rep = None
    return sa, sb, array, dist, rep


SWEEP_COLUMNS = [
    "value", "status", "message", "n_peaks", "peak_locations", "peak_masses", "peak_widths",
    "poisson_widths", "width_ratios", "max_width_ratio", "all_narrower", "predicted_n2_low", "predicted_n2_high",
]


def run_sweep(cfg: ExperimentConfig, out: CsvOut, cache=None, threads=1):
    sw = cfg.sweep
    if sw is None:
        raise ConfigError("sweep: required for the sweep subcommand")
    if cfg.conditioning is None:
        raise ConfigError("conditioning: required for the sweep subcommand")
    t0 = time.perf_counter()
    rows, pmf_rows = [], []
    shared = None
    if sw.parameter == "n1":
        # one joint table serves every conditioning count
        sa, sb = cfg.build_sources()
        shared = _joint(cfg, sa, sb, cfg.build_array(), cache, threads)
    for value in sw.values:
        try:
            pcfg = cfg if sw.parameter == "q" else _point_config(cfg, sw.parameter, value)
            sa, sb, array, dist, rep = _point_conditional(pcfg, cache, threads, sw.parameter, value, shared)
        except ConfigError:
            raise
        except (BosecountError, ValueError) as exc:
            rows.append((value, type(exc).__name__, str(exc).replace("\n", " "), 0) + ("",) * 9)
            continue
        est = _estimate_rows(pcfg, sa, sb, array, pcfg.conditioning)
        est = dict(est)
        lohi = (est.get("marker_low", ""), est.get("marker_high", ""))
        pmf_rows.extend((value, int(n), p) for n, p in zip(dist.support, dist.pmf))
        if rep is None:
            rows.append((value, "washed_out", "no peak clears min_mass", 0, "", "", "", "", "", math.inf, False) + lohi)
            continue
        j = lambda xs: ";".join(fmt(x) for x in xs)  # noqa: E731
        rows.append((
            value, "ok", "", len(rep.peaks),
            j(p.location for p in rep.peaks), j(p.mass for p in rep.peaks), j(p.width for p in rep.peaks),
            j(rep.poisson_width_at_peak), j(rep.width_ratios), rep.max_width_ratio,
            all(rep.narrower_than_poisson),
        ) + lohi)
    runtime = time.perf_counter() - t0
    meta = {"parameter": sw.parameter, "given_detector": cfg.conditioning.detector_index,
            "given_count": cfg.conditioning.count, "min_mass": cfg.min_mass}
    out.write("sweep", meta, SWEEP_COLUMNS, rows, runtime=runtime)
    cond_target = 3 - cfg.conditioning.detector_index
    out.write("sweep_conditionals", meta, ["value", f"n{cond_target}", "probability"], pmf_rows)
    return rows


def default_cache_dir() -> Path:
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "bosecount"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment JSON")
    common.add_argument("--out", metavar="DIR", help="output directory (default: config output.directory or .)")
    common.add_argument("--threads", metavar="N", type=int, help="worker threads for the Fock kernels")
    common.add_argument("--cache", metavar="DIR", help="persistent kernel cache directory")
    common.add_argument("--budget", metavar="N", type=int, help="ceiling on Fock configurations per kernel")
    p = argparse.ArgumentParser(prog="bosecount", description="Joint photon-count statistics of two interfering sources.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("joint", "joint count table and summary"),
        ("conditional", "conditional pmf, peak report and mean-field estimate"),
        ("scaling-check", "residual of the detector-scaling identity"),
        ("sweep", "conditional peak reports over a one-dimensional grid"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    cache = sub.add_parser("cache", help="manage the kernel cache")
    csub = cache.add_subparsers(dest="cache_command", required=True)
    for name, help_ in [("clear", "delete cached kernels"), ("stat", "report cache contents")]:
        csub.add_parser(name, parents=[common], help=help_)
    return p


def _cache_main(args) -> int:
    kc = KernelCache(args.cache or default_cache_dir())
    if args.cache_command == "clear":
        n = kc.clear()
        print(f"removed {n} cached kernels from {kc.directory}")
    else:
        for k, v in kc.stat().items():
            print(f"{k}: {v}")
    return EXIT_OK


RUNNERS = {
    "joint": run_joint,
    "conditional": run_conditional,
    "scaling-check": run_scaling_check,
    "sweep": run_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "cache":
            return _cache_main(args)
        if not args.config:
            raise ConfigError("--config PATH is required")
        cfg = load_config(args.config)
        if args.budget is not None:
            if args.budget < 1:
                raise ConfigError("--budget must be positive")
            cfg = replace(cfg, budget=args.budget)
        threads = args.threads if args.threads is not None else cfg.threads
        if threads < 1:
            raise ConfigError("--threads must be positive")
        out = CsvOut(Path(args.out or cfg.output_directory or "."), cfg.output_prefix)
        cache = KernelCache(args.cache) if args.cache else None
        RUNNERS[args.command](cfg, out, cache=cache, threads=threads)
        for path in out.written:
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NegligibleEvidence as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except PhysicsError as exc:
        print(f"physics error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BosecountError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
