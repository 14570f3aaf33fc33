"""Command-line entry point.

Subcommands wire the pipeline: ``preprocess`` raw JSONL into a document
stream, ``synth`` a ground-truth stream, ``run`` the inference engine,
``analyze`` a run directory, ``report`` across analyzed runs, and ``grid``
for the full experiment cross-product. Flags can also be given in an INI
config file (section per subcommand); explicit flags win.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytics, corpus, inference, synthgen
from .temporal import kernel_from_dict, lambda0_heuristic, preset

log = logging.getLogger("hawkstream")


def _setup_logging(verbose: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(
        "%(asctime)s %(levelname)s %(name)s %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _config_section(path: str | None, section: str) -> dict:
    if not path:
        return {}
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section(section):
        return {}
    return dict(parser.items(section))


def _merged(args: argparse.Namespace, section: str) -> dict:
    """Config-file values fill in flags the user did not set."""
    merged = _config_section(getattr(args, "config", None), section)
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "func", "verbose"):
            merged[key.replace("_", "-")] = value
    return merged


def _resolve_kernel(spec: str, lam0_override=None):
    """Kernel spec: preset name or path to a JSON file with means/sigmas
    (minutes) and lam0."""
    if spec in ("minute", "hour", "day"):
        kernel, lam0 = preset(spec)
        name = spec
    else:
        with open(spec, encoding="utf-8") as fh:
            obj = json.load(fh)
        kernel = kernel_from_dict(obj)
        lam0 = float(obj.get("lam0", lambda0_heuristic(kernel)))
        name = Path(spec).stem
    if lam0_override is not None:
        lam0 = float(lam0_override)
    return kernel, lam0, name


# ---------------------------------------------------------------------------
# Subcommands

def cmd_preprocess(args) -> int:
    opts = _merged(args, "preprocess")
    records = list(corpus.read_raw_jsonl(Path(opts["input"])))
    log.info("preprocess stage=read records=%d", len(records))
    min_len = int(opts.get("min-word-len", corpus.DEFAULT_MIN_WORD_LEN))
    vocab = corpus.build_vocabulary(
        records, min_word_len=min_len,
        min_word_freq=int(opts.get("min-word-freq", corpus.DEFAULT_MIN_WORD_FREQ)))
    log.info("preprocess stage=vocabulary size=%d", vocab.size)
    docs, channels, report = corpus.curate(
        records, vocab,
        min_score=int(opts.get("min-score", corpus.DEFAULT_MIN_SCORE)),
        min_tokens=int(opts.get("min-tokens", corpus.DEFAULT_MIN_TOKENS)),
        min_word_len=min_len)
    log.info("preprocess stage=curate retained=%d dropped_score=%d dropped_tokens=%d",
             report.n_retained, report.n_dropped_score, report.n_dropped_tokens)
    out = Path(opts["output"])
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_documents(out, docs, vocab, channels)
    if opts.get("stats-dir"):
        corpus.write_stats_csv(corpus.dataset_stats(docs), Path(opts["stats-dir"]))
    return 0


def cmd_synth(args) -> int:
    opts = _merged(args, "synth")
    truth = synthgen.load_scenario(Path(opts["scenario"]))
    rng = np.random.default_rng(int(opts.get("seed", 0)))
    events = synthgen.simulate_events(truth, rng)
    log.info("synth stage=events count=%d", len(events))
    docs, labels, vocab, channels = synthgen.emit_documents(events, truth, rng)
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_documents(out, docs, vocab, channels)
    if opts.get("labels"):
        synthgen.write_labels(Path(opts["labels"]), labels)
    return 0


def cmd_run(args) -> int:
    opts = _merged(args, "run")
    docs, vocab, channels = corpus.read_documents(Path(opts["input"]))
    kernel, lam0, kernel_name = _resolve_kernel(
        str(opts.get("kernel", "minute")), opts.get("lam0"))
    cfg = inference.InferenceConfig(
        kernel=kernel,
        lam0=lam0,
        theta0=float(opts.get("theta0", 0.01)),
        r=float(opts.get("r", 1.0)),
        vocab_size=vocab.size,
        particles=int(opts.get("particles", 8)),
        alpha_samples=int(opts.get("alpha-samples", 100_000)),
        seed=int(opts.get("seed", 0)),
        alpha_refresh_every=int(opts.get("alpha-refresh-every", 50)),
        max_estimate_events=int(opts.get("max-estimate-events", 400)),
        checkpoint_every=int(opts.get("checkpoint-every", 0)),
        kernel_name=kernel_name,
    )
    out_dir = Path(opts["output"])
    log.info("run stage=start documents=%d vocabulary=%d particles=%d",
             len(docs), vocab.size, cfg.particles)
    result = inference.run(docs, cfg, n_channels=len(channels),
                           checkpoint_dir=out_dir / "checkpoints")
    log.info("run stage=done clusters=%d runtime=%.1fs", result.k, result.runtime_seconds)
    inference.write_result(result, out_dir, vocab=vocab)
    return 0


CONFIG_HEADER_KEYS = ("kernel_name", "theta0", "r", "lam0", "particles",
                      "alpha_samples", "seed")


def _config_header(cfg_dict: dict) -> str:
    parts = [f"{k}={cfg_dict[k]}" for k in CONFIG_HEADER_KEYS if k in cfg_dict]
    return "# " + " ".join(parts)


def analyze_run(run_dir: Path, out_dir: Path) -> dict:
    """Compute all analytics for one run directory; returns the summary."""
    result = inference.load_result(run_dir)
    cfg = result.config
    histories = result.histories()
    W = analytics.effective_interaction(result.alpha, histories, cfg.kernel,
                                        cfg.lam0, result.cluster_ids)
    active = np.asarray([len(histories[cid]) > 0 for cid in result.cluster_ids])
    strength = analytics.strength_report(result.alpha, W, active)
    range_profile = analytics.interaction_range(W, active)
    creport = analytics.cluster_report(result)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = _config_header(cfg.to_dict())

    with open(out_dir / "strength.csv", "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        fh.write("mean_A,std_A,mean_W,std_W,mean_A_weighted,std_A_weighted,"
                 "intra_extra_ratio,intra_extra_ratio_std\n")
        row = [strength.mean_A, strength.std_A, strength.mean_W, strength.std_W,
               strength.mean_A_weighted, strength.std_A_weighted,
               strength.intra_extra_ratio, strength.intra_extra_ratio_std]
        fh.write(",".join("" if v is None else repr(v) for v in row) + "\n")

    with open(out_dir / "range.csv", "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        fh.write("entry,mean_center_minutes,mean_W\n")
        for l, v in enumerate(range_profile):
            fh.write(f"{l},{cfg.kernel.means[l]!r},{v!r}\n")

    with open(out_dir / "clusters.csv", "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        fh.write("k,mean_population,std_population,s_text_top,s_text_top_std,"
                 "s_sub_top,s_sub_top_std\n")
        row = [creport.k, creport.mean_population, creport.std_population,
               creport.s_text_top, creport.s_text_top_std,
               creport.s_sub_top, creport.s_sub_top_std]
        fh.write(",".join("" if v is None else repr(v) for v in row) + "\n")

    analytics.export_distribution(W, out_dir / "distribution.csv")

    summary = {
        "config": cfg.to_dict(),
        "k": creport.k,
        "mean_population": creport.mean_population,
        "s_text_top": creport.s_text_top,
        "s_sub_top": creport.s_sub_top,
        "mean_A": strength.mean_A,
        "mean_W": strength.mean_W,
        "mean_A_weighted": strength.mean_A_weighted,
        "intra_extra_ratio": strength.intra_extra_ratio,
        "range": [float(v) for v in range_profile],
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def cmd_analyze(args) -> int:
    opts = _merged(args, "analyze")
    run_dir = Path(opts["run"])
    out_dir = Path(opts.get("out", run_dir / "analysis"))
    analyze_run(run_dir, out_dir)
    log.info("analyze stage=done out=%s", out_dir)
    return 0


def write_report_grids(summaries: list, out_dir: Path) -> None:
    """Assemble per-run summaries into grid CSVs (one row per run)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def key(s):
        c = s["config"]
        return (c.get("kernel_name", ""), -float(c["theta0"]), float(c["r"]))

    rows = sorted((s for s in summaries if "error" not in s), key=key)
    failed = [s for s in summaries if "error" in s]

    with open(out_dir / "grid_clusters.csv", "w", encoding="utf-8") as fh:
        fh.write("kernel,theta0,r,status,k,mean_population,s_text_top,s_sub_top\n")
        for s in rows:
            c = s["config"]
            fh.write(f"{c['kernel_name']},{c['theta0']!r},{c['r']!r},ok,"
                     f"{s['k']},{s['mean_population']!r},"
                     f"{s['s_text_top']!r},{s['s_sub_top']!r}\n")
        for s in failed:
            c = s["config"]
            fh.write(f"{c['kernel_name']},{c['theta0']!r},{c['r']!r},failed,,,,\n")

    with open(out_dir / "grid_strength.csv", "w", encoding="utf-8") as fh:
        fh.write("kernel,theta0,r,status,mean_A,mean_W,mean_A_weighted,intra_extra_ratio\n")
        for s in rows:
            c = s["config"]
            maw = "" if s["mean_A_weighted"] is None else repr(s["mean_A_weighted"])
            ratio = "" if s["intra_extra_ratio"] is None else repr(s["intra_extra_ratio"])
            fh.write(f"{c['kernel_name']},{c['theta0']!r},{c['r']!r},ok,"
                     f"{s['mean_A']!r},{s['mean_W']!r},{maw},{ratio}\n")
        for s in failed:
            c = s["config"]
            fh.write(f"{c['kernel_name']},{c['theta0']!r},{c['r']!r},failed,,,,\n")

    max_entries = max((len(s["range"]) for s in rows), default=0)
    with open(out_dir / "grid_range.csv", "w", encoding="utf-8") as fh:
        cols = ",".join(f"entry_{l}" for l in range(max_entries))
        fh.write(f"kernel,theta0,r,status,{cols}\n")
        for s in rows:
            c = s["config"]
            vals = [repr(v) for v in s["range"]]
            vals += [""] * (max_entries - len(vals))
            fh.write(f"{c['kernel_name']},{c['theta0']!r},{c['r']!r},ok," + ",".join(vals) + "\n")
        for s in failed:
            c = s["config"]
            fh.write(f"{c['kernel_name']},{c['theta0']!r},{c['r']!r},failed,"
                     + ",".join([""] * max_entries) + "\n")


def cmd_report(args) -> int:
    opts = _merged(args, "report")
    if not args.runs:
        raise ValueError("report requires --runs")
    summaries = []
    for d in args.runs:
        with open(Path(d) / "analysis" / "summary.json", encoding="utf-8") as fh:
            summaries.append(json.load(fh))
    write_report_grids(summaries, Path(opts["out"]))
    return 0


def _grid_cell(task: dict) -> dict:
    """One grid cell: run + analyze. Returns the summary (or error record)."""
    try:
        docs, vocab, channels = corpus.read_documents(Path(task["input"]))
        kernel, lam0, kernel_name = _resolve_kernel(task["kernel"])
        cfg = inference.InferenceConfig(
            kernel=kernel, lam0=lam0, theta0=task["theta0"], r=task["r"],
            vocab_size=vocab.size, particles=task["particles"],
            alpha_samples=task["alpha_samples"], seed=task["seed"],
            alpha_refresh_every=task.get("alpha_refresh_every", 50),
            max_estimate_events=task.get("max_estimate_events", 400),
            kernel_name=kernel_name)
        out_dir = Path(task["out_dir"])
        result = inference.run(docs, cfg, n_channels=len(channels))
        inference.write_result(result, out_dir, vocab=vocab)
        return analyze_run(out_dir, out_dir / "analysis")
    except Exception as exc:  # cell failures must not abort the grid
        log.error("grid cell %s failed: %s", task["out_dir"], exc)
        return {"config": {"kernel_name": task["kernel"], "theta0": task["theta0"],
                           "r": task["r"]},
                "error": str(exc)}


def cmd_grid(args) -> int:
    opts = _merged(args, "grid")
    kernels = [k.strip() for k in str(opts.get("kernels", "minute,hour,day")).split(",")]
    theta0s = [float(x) for x in str(opts.get("theta0", "0.01,0.001")).split(",")]
    rs = [float(x) for x in str(opts.get("r", "0,0.5,1,1.5")).split(",")]
    seed = int(opts.get("seed", 0))
    jobs = int(opts.get("jobs", 1))
    out_root = Path(opts["out"])

    tasks = []
    for kernel in kernels:
        for theta0 in theta0s:
            for r in rs:
                tasks.append({
                    "input": opts["input"],
                    "kernel": kernel,
                    "theta0": theta0,
                    "r": r,
                    "particles": int(opts.get("particles", 8)),
                    "alpha_samples": int(opts.get("alpha-samples", 100_000)),
                    "alpha_refresh_every": int(opts.get("alpha-refresh-every", 50)),
                    "max_estimate_events": int(opts.get("max-estimate-events", 400)),
                    "seed": seed,
                    "out_dir": str(out_root / f"{kernel}_theta{theta0:g}_r{r:g}"),
                })
    log.info("grid stage=start cells=%d jobs=%d", len(tasks), jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_grid_cell, tasks))
    else:
        summaries = [_grid_cell(t) for t in tasks]
    if all("error" in s for s in summaries):
        log.error("grid stage=failed all cells failed")
        return 1
    write_report_grids(summaries, out_root)
    log.info("grid stage=done ok=%d failed=%d",
             sum("error" not in s for s in summaries),
             sum("error" in s for s in summaries))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkstream",
        description="Online topic clustering of headline streams with "
                    "interaction analytics.")
    parser.add_argument("--config", help="INI config file; flags override it")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="curate raw JSONL into a document stream")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--min-score", type=int)
    p.add_argument("--min-tokens", type=int)
    p.add_argument("--min-word-len", type=int)
    p.add_argument("--min-word-freq", type=int)
    p.add_argument("--stats-dir")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("synth", help="generate a ground-truth synthetic stream")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--labels")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the inference engine on a document stream")
    p.add_argument("--input")
    p.add_argument("--kernel", help="minute|hour|day or a kernel JSON file")
    p.add_argument("--lam0", type=float)
    p.add_argument("--theta0", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--particles", type=int)
    p.add_argument("--alpha-samples", type=int)
    p.add_argument("--alpha-refresh-every", type=int)
    p.add_argument("--max-estimate-events", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="compute analytics for a run directory")
    p.add_argument("--run")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="assemble grid CSVs from analyzed runs")
    p.add_argument("--runs", nargs="+", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("grid", help="run the full experiment cross-product")
    p.add_argument("--input")
    p.add_argument("--kernels")
    p.add_argument("--theta0")
    p.add_argument("--r")
    p.add_argument("--particles", type=int)
    p.add_argument("--alpha-samples", type=int)
    p.add_argument("--alpha-refresh-every", type=int)
    p.add_argument("--max-estimate-events", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_grid)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except (KeyError, FileNotFoundError, ValueError) as exc:
        log.error("invalid invocation: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
