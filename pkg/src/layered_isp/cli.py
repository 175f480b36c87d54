"""Command-line driver: synthesize, retrieve, invert, evaluate, pipeline.

Every artifact carries the config hash in its schema line. Subcommands that
read earlier artifacts refuse files produced under a different config.
Timestamps and timings go to ``metadata.json`` only, so the rest of an
output directory is byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import argparse
import itertools
import json
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import io
from .config import APERTURES, PRESETS, ExperimentConfig, load_config, preset
from .errors import InvalidConfigError, LayeredISPError, SchemaError
from .forward import (FarFieldDataset, read_farfield_csv, read_phaseless_csv, synthesize_dataset,
                      synthesize_phaseless)
from .inversion import invert_values, read_coefficients_csv, reconstruct
from .lattice import AdmissibleSet, build_admissible_set, read_lattice_csv
from .medium import Medium
from .metrics import (NoiseSpec, add_noise, dump_metrics, err_at_index, err_inf, err_l2, grid_rel_l2,
                      metric_record)
from .quadrature import SourceBox, default_orders, tensor_rule
from .retrieval import read_retrieval_csv, retrieve_dataset
from .sources import ANALYTIC, FourierSeriesSource, oracle_coefficients, sample_grid

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


# ---------------------------------------------------------------- setup helpers

def make_medium(cfg: ExperimentConfig) -> Medium:
    return Medium(cfg.c_minus, cfg.c_plus)


def make_box(cfg: ExperimentConfig) -> SourceBox:
    return SourceBox(cfg.dimension, cfg.a, cfg.L)


def make_rule(cfg: ExperimentConfig):
    box = make_box(cfg)
    return tensor_rule(box, cfg.orders or default_orders(box, cfg.N))


def make_source(cfg: ExperimentConfig):
    if cfg.source == "analytic":
        return ANALYTIC[f"analytic-{cfg.dimension}d"]()
    table = read_coefficients_csv(cfg.source_path)
    if table.n != cfg.dimension:
        raise InvalidConfigError(f"source.file: coefficients are {table.n}D, config is {cfg.dimension}D")
    if abs(table.a - cfg.a) > 1e-12 * cfg.a:
        raise InvalidConfigError(f"source.file: period {table.a} differs from box.a {cfg.a}")
    return table.as_source()


def make_lattice(cfg: ExperimentConfig, aperture=None) -> AdmissibleSet:
    """Admissible set for ``aperture`` (default: the configured one).

    With ``cfg.indices`` only those indices and the zero index are measured,
    so reference strengths come from those directions alone. Requested
    indices the aperture filter drops are added back explicitly.
    """
    aperture = aperture or cfg.aperture
    lat = build_admissible_set(make_medium(cfg), cfg.dimension, cfg.N, cfg.a, cfg.lam,
                               full_aperture=aperture != "limited", zero_direction=cfg.zero_direction,
                               grazing=aperture == "hemisphere")
    if cfg.indices is None:
        return lat
    for l in cfg.indices:
        lat = lat.with_extra_index(l)
    return lat.subset([lat.row_of(l) for l in cfg.indices] + [lat.zero_row])


def run_tag(eps, seed):
    return "eps0" if eps == 0 else f"eps{eps:g}_seed{seed}"


def noise_runs(cfg: ExperimentConfig):
    """Ordered ``(eps, seed)`` pairs; the noiseless run is done once."""
    out = []
    for eps in cfg.noise_eps:
        if eps == 0:
            if (0.0, None) not in out:
                out.append((0.0, None))
        else:
            out.extend((float(eps), s) for s in cfg.seeds)
    return out


def _file_meta(path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("# layered_isp"):
        raise SchemaError(f"{path}: missing schema comment line", line=1)
    return dict(tok.split("=", 1) for tok in first[1:].split()[1:] if "=" in tok)


def check_hash(path, cfg_hash):
    found = _file_meta(path).get("config_hash")
    if found is None:
        raise SchemaError(f"{path}: no config_hash; artifacts must come from this tool", line=1)
    if cfg_hash is not None and found != cfg_hash:
        raise InvalidConfigError(f"{path}: config hash {found} differs from {cfg_hash}; "
                                 "refusing to mix artifacts from different configs")
    return found


# ---------------------------------------------------------------- subcommands

def cmd_synthesize(cfg: ExperimentConfig, out, workers=1, log=print):
    """Lattice, phased and phaseless (noiseless plus every noisy run) CSVs."""
    out = Path(out)
    h = cfg.hash()
    t0 = time.perf_counter()
    m, box, rule = make_medium(cfg), make_box(cfg), make_rule(cfg)
    lat = make_lattice(cfg)
    data = synthesize_dataset(m, box, rule, make_source(cfg), lat, workers)
    refs = cfg.references
    phaseless = synthesize_phaseless(data, refs, m)
    meta = {"config_hash": h}
    lat.to_csv(out / "lattice.csv", meta)
    data.to_csv(out / "farfield.csv", meta)
    files = {"lattice": "lattice.csv", "farfield": "farfield.csv", "phaseless": {}}
    for eps, seed in noise_runs(cfg):
        noisy = add_noise(phaseless, NoiseSpec(eps, seed or 0, cfg.noise_targets))
        name = f"phaseless_{run_tag(eps, seed)}.csv"
        noisy.to_csv(out / name, meta)
        files["phaseless"][run_tag(eps, seed)] = name
    elapsed = time.perf_counter() - t0
    log(f"synthesize: {len(lat)} entries ({int(lat.nonzero_mask.sum())} non-zero), "
        f"orders {'x'.join(map(str, rule.orders))}, {elapsed:.2f}s")
    return {"entries": len(lat), "files": files, "data": data, "phaseless": phaseless,
            "lattice": lat, "seconds": elapsed}


def cmd_retrieve(cfg: ExperimentConfig, phaseless_path, out, lattice_path=None, exact_path=None,
                 name="retrieval.csv", log=print):
    """Retrieve phases; writes the retrieval CSV and, with exact data, metrics JSON."""
    phaseless_path, out = Path(phaseless_path), Path(out)
    h = cfg.hash()
    lattice_path = Path(lattice_path) if lattice_path else phaseless_path.parent / "lattice.csv"
    check_hash(phaseless_path, h)
    check_hash(lattice_path, h)
    lat = read_lattice_csv(lattice_path)
    p = read_phaseless_csv(phaseless_path, lat, cfg.references)
    rep = retrieve_dataset(p, cfg.references, make_medium(cfg), lat, rescale=cfg.rescale)
    meta = {k: v for k, v in p.meta.items() if k.startswith("noise") or k in ("generator", "clamped")}
    rep.meta = {**meta, "config_hash": h}
    rep.to_csv(out / name)
    result = {"entries": len(lat), "flagged": len(rep.flagged), "report": rep}
    if exact_path is not None:
        check_hash(exact_path, h)
        exact = read_farfield_csv(exact_path, lat)
        result["metrics"] = evaluate_retrieval(cfg, exact, rep, h)
        dump_metrics(result["metrics"], out / (Path(name).stem + "_metrics.json"))
        log(f"retrieve: Err_L2={result['metrics'][0]['value']:.3e} Err_inf={result['metrics'][1]['value']:.3e}")
    log(f"retrieve: {len(lat)} entries, {len(rep.flagged)} flagged")
    return result


def evaluate_retrieval(cfg, exact: FarFieldDataset, rep, h):
    eps = float(rep.meta.get("noise_eps", 0) or 0)
    seed = rep.meta.get("noise_seed")
    seed = int(seed) if seed not in (None, "") and eps else None
    recs = [metric_record("err_l2", err_l2(exact, rep), eps, seed, h),
            metric_record("err_inf", err_inf(exact, rep), eps, seed, h)]
    for l in cfg.indices or ():
        recs.append(metric_record(f"err_index{list(l)}", err_at_index(exact, rep, l), eps, seed, h))
    return recs


def _read_values(path, lat):
    kind = _file_meta(path).get("kind")
    if kind == "farfield":
        return read_farfield_csv(path, lat).values
    if kind == "retrieval":
        return read_retrieval_csv(path, lat).values
    raise SchemaError(f"{path}: expected a farfield or retrieval file, found kind {kind!r}", line=1)


def cmd_invert(cfg: ExperimentConfig, input_path, out, lattice_path=None, prefix="", log=print):
    """Coefficient table and reconstruction grid from phased or retrieved data."""
    input_path, out = Path(input_path), Path(out)
    h = cfg.hash()
    lattice_path = Path(lattice_path) if lattice_path else input_path.parent / "lattice.csv"
    check_hash(input_path, h)
    check_hash(lattice_path, h)
    lat = read_lattice_csv(lattice_path)
    if cfg.indices is not None:
        raise InvalidConfigError("inversion needs the whole lattice, not an index subset")
    values = _read_values(input_path, lat)
    table = invert_values(values, lat, make_medium(cfg), make_box(cfg), cfg.zero_mode, cfg.real_source)
    grid = reconstruct(table, make_box(cfg), cfg.grid_resolution)
    meta = {"config_hash": h}
    table.to_csv(out / f"{prefix}coefficients.csv", meta)
    grid.to_csv(out / f"{prefix}reconstruction.csv", meta)
    counts = table.counts()
    log("invert: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return {"table": table, "grid": grid, "provenance": counts,
            "imag_sup": float(np.max(np.abs(grid.values.imag)))}


def truth_grids(cfg: ExperimentConfig, workers=1):
    """Exact source and its order-``N`` Fourier truncation on the output grid."""
    box, rule, src = make_box(cfg), make_rule(cfg), make_source(cfg)
    idx = list(itertools.product(range(-cfg.N, cfg.N + 1), repeat=cfg.dimension))
    coef = oracle_coefficients(src, rule, idx, workers)
    truncated = FourierSeriesSource(dict(zip(idx, coef)), cfg.a, cfg.dimension)
    res = cfg.grid_resolution
    return sample_grid(src, box, res), sample_grid(truncated, box, res)


def cmd_evaluate(cfg: ExperimentConfig, exact_path, recovered_path, out, lattice_path=None, log=print):
    """Metrics of a retrieval (or phased) file against exact phased data."""
    exact_path, recovered_path, out = Path(exact_path), Path(recovered_path), Path(out)
    h = cfg.hash()
    if check_hash(exact_path, h) != check_hash(recovered_path, h):
        raise InvalidConfigError("exact and recovered files come from different configs")
    lattice_path = Path(lattice_path) if lattice_path else exact_path.parent / "lattice.csv"
    check_hash(lattice_path, h)
    lat = read_lattice_csv(lattice_path)
    exact = read_farfield_csv(exact_path, lat)
    kind = _file_meta(recovered_path).get("kind")
    if kind == "retrieval":
        rec = read_retrieval_csv(recovered_path, lat)
    else:
        rec = FarFieldDataset(lat, _read_values(recovered_path, lat), {})
    recs = evaluate_retrieval(cfg, exact, rec, h)
    out.mkdir(parents=True, exist_ok=True)
    dump_metrics(recs, out / "evaluation.json")
    for r in recs:
        log(f"evaluate: {r['metric']} = {r['value']:.6e}")
    return recs


def _median_table(records, metric):
    by_eps = {}
    for r in records:
        if r["metric"] == metric:
            by_eps.setdefault(r["eps"], []).append(r["value"])
    return {f"{e:g}": float(np.median(v)) for e, v in sorted(by_eps.items())}


def cmd_pipeline(cfg: ExperimentConfig, out, workers=1, log=print):
    """synthesize -> noise -> retrieve -> invert -> evaluate, plus summary JSON."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    started = datetime.now(timezone.utc).isoformat()
    timings, stage, status = {}, "synthesize", "failed"
    try:
        t = time.perf_counter()
        syn = cmd_synthesize(cfg, out, workers, log)
        timings["synthesize"] = time.perf_counter() - t

        stage, t = "retrieve", time.perf_counter()
        records, runs = [], {}
        for eps, seed in noise_runs(cfg):
            tag = run_tag(eps, seed)
            res = cmd_retrieve(cfg, out / syn["files"]["phaseless"][tag], out, out / "lattice.csv",
                               out / "farfield.csv", name=f"retrieval_{tag}.csv", log=lambda *_: None)
            records.extend(res["metrics"])
            runs[tag] = {"flagged": res["flagged"], "metrics": {r["metric"]: r["value"] for r in res["metrics"]}}
        timings["retrieve"] = time.perf_counter() - t
        summary = {
            "config_hash": h, "config": cfg.as_dict(), "entries": syn["entries"],
            "runs": runs,
            "table": {"eps": [f"{e:g}" for e in sorted({r["eps"] for r in records})],
                      "err_l2_median": _median_table(records, "err_l2"),
                      "err_inf_median": _median_table(records, "err_inf")},
        }
        if cfg.indices:
            summary["per_index"] = {str(list(l)): _median_table(records, f"err_index{list(l)}")
                                    for l in cfg.indices}

        if cfg.invert:
            stage, t = "invert", time.perf_counter()
            exact_grid, truncated = truth_grids(cfg, workers)
            recon = {}
            for eps, seed in noise_runs(cfg):
                tag = run_tag(eps, seed)
                inv = cmd_invert(cfg, out / f"retrieval_{tag}.csv", out, out / "lattice.csv",
                                 prefix=f"{tag}_", log=lambda *_: None)
                recon[tag] = _grid_summary(inv, exact_grid, truncated)
            summary["reconstruction"] = {cfg.aperture: recon}
            if cfg.compare_apertures:
                for ap in APERTURES:
                    if ap != cfg.aperture:
                        summary["reconstruction"][ap] = _aperture_run(cfg, ap, out, exact_grid, truncated, workers)
            timings["invert"] = time.perf_counter() - t
        records_path = out / "metrics.json"
        dump_metrics(records, records_path)
        _write_json(out / "summary.json", summary)
        status = "ok"
        return summary
    except Exception as exc:
        status = f"failed at stage {stage}: {exc}"
        (out / "FAILED").write_text(status + "\n", encoding="utf-8")
        raise
    finally:
        _write_json(out / "metadata.json", {
            "config_hash": h, "started": started, "finished": datetime.now(timezone.utc).isoformat(),
            "seconds": timings, "workers": workers, "status": status,
            "python": platform.python_version(), "numpy": np.__version__,
        })
        log(f"pipeline: {status} ({sum(timings.values()):.2f}s)")


def _grid_summary(inv, exact_grid, truncated):
    return {"err_vs_truncated": grid_rel_l2(inv["grid"], truncated),
            "err_vs_source": grid_rel_l2(inv["grid"], exact_grid),
            "imag_sup": inv["imag_sup"], "provenance": inv["provenance"]}


def _aperture_run(cfg, aperture, out, exact_grid, truncated, workers):
    """Noiseless synthesize -> retrieve -> invert on another aperture mode."""
    m = make_medium(cfg)
    lat = make_lattice(cfg, aperture)
    data = synthesize_dataset(m, make_box(cfg), make_rule(cfg), make_source(cfg), lat, workers)
    rep = retrieve_dataset(synthesize_phaseless(data, cfg.references, m), cfg.references, m)
    table = invert_values(rep.values, lat, m, make_box(cfg), cfg.zero_mode, cfg.real_source)
    grid = reconstruct(table, make_box(cfg), cfg.grid_resolution)
    meta = {"config_hash": cfg.hash(), "aperture": aperture}
    table.to_csv(out / f"aperture_{aperture}_coefficients.csv", meta)
    grid.to_csv(out / f"aperture_{aperture}_reconstruction.csv", meta)
    inv = {"grid": grid, "provenance": table.counts(), "imag_sup": float(np.max(np.abs(grid.values.imag)))}
    return {"eps0": {**_grid_summary(inv, exact_grid, truncated), "entries": len(lat)}}


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- argument parsing

def build_parser():
    parser = argparse.ArgumentParser(
        prog="layered-isp",
        description="Phaseless inverse source problem in a two-layer medium.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    common.add_argument("--output", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--workers", type=int, default=1, help="threads for synthesis (output is identical)")
    common.add_argument("--seed", type=int, help="use this single noise seed")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    sub.add_parser("synthesize", parents=[common], help="write lattice, phased and phaseless CSVs")
    p = sub.add_parser("retrieve", parents=[common], help="recover phases from a phaseless CSV")
    p.add_argument("--input", type=Path, required=True, help="phaseless CSV")
    p.add_argument("--lattice", type=Path, help="lattice CSV (default: next to the input)")
    p.add_argument("--exact", type=Path, help="phased CSV for error metrics")
    p = sub.add_parser("invert", parents=[common], help="Fourier inversion of phased or retrieved data")
    p.add_argument("--input", type=Path, required=True, help="farfield or retrieval CSV")
    p.add_argument("--lattice", type=Path, help="lattice CSV (default: next to the input)")
    sub.add_parser("pipeline", parents=[common], help="run every stage and write summary.json")
    p = sub.add_parser("evaluate", parents=[common], help="error metrics of recovered vs exact data")
    p.add_argument("--exact", type=Path, required=True, help="phased CSV")
    p.add_argument("--recovered", type=Path, required=True, help="retrieval or farfield CSV")
    p.add_argument("--lattice", type=Path, help="lattice CSV (default: next to the exact file)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    base = preset(args.preset) if args.preset else None
    cfg = load_config(args.config, base) if args.config else (base or ExperimentConfig())
    if args.seed is not None:
        cfg = cfg.replace(seeds=(args.seed,))
    if args.workers < 1:
        raise InvalidConfigError(f"--workers must be >= 1, got {args.workers}")
    return cfg


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        if args.command == "synthesize":
            cmd_synthesize(cfg, args.output, args.workers)
        elif args.command == "retrieve":
            cmd_retrieve(cfg, args.input, args.output, args.lattice, args.exact)
        elif args.command == "invert":
            cmd_invert(cfg, args.input, args.output, args.lattice)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.exact, args.recovered, args.output, args.lattice)
        else:
            cmd_pipeline(cfg, args.output, args.workers)
    except LayeredISPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
