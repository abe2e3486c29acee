"""Command-line front end: ``stnsync {synth,sync,features,eval}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 solver did not converge.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import ConfigError, ConvergenceError, StnSyncError
from .evaluation import (CHANCE_RATE_PCT, dumps_json, evaluate_pair, fig2_csv,
                         per_pair_sweep, table1_csv, table2_csv, write_tables)
from .pipeline import CLASSIFIERS, PipelineConfig, global_pca, make_trainer, prepare
from .signal_io import CLASSES, SynthConfig, load_recording, save_recording, synth_recording
from .sync import sync_matrix
from .preprocess import bandpass, recording_bipolar

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair(text: str):
    if text in ("auto", "all"):
        return text
    try:
        l, r = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"pair must be 'auto', 'all' or 'L,R', got {text!r}")
    if l not in (0, 1, 2) or r not in (0, 1, 2):
        raise argparse.ArgumentTypeError("pair indices must be 0, 1 or 2")
    return (l, r)


def _read_config(path) -> Dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")


def _emit(obj):
    sys.stdout.write(dumps_json(obj))


def pipeline_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_dict(_read_config(args.config)) if args.config else PipelineConfig()
    train = cfg.train
    if getattr(args, "C", None) is not None:
        train = replace(train, C=args.C)
    if getattr(args, "p", None) is not None:
        train = replace(train, p=args.p)
    updates = {"train": train}
    if getattr(args, "band", None) is not None:
        updates["sync_band_hz"] = tuple(args.band)
    if getattr(args, "classifier", None) not in (None, "all"):
        updates["classifier"] = args.classifier
    if getattr(args, "paper_mode", False):
        updates["paper_mode"] = True
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    return replace(cfg, **updates)


def _dump_config(args, cfg: PipelineConfig):
    if getattr(args, "dump_config", None):
        Path(args.dump_config).write_text(cfg.dumps())


# --- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    base = SynthConfig.from_dict(_read_config(args.config)) if args.config else SynthConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["n_trials_per_class"] = args.trials
    if args.coupled_pair is not None:
        updates["coupled_pair"] = args.coupled_pair
    if args.snr is not None:
        updates["coupling_snr"] = args.snr
    cfg = replace(base, **updates)
    rec = synth_recording(cfg)
    save_recording(rec, args.out)
    if args.dump_config:
        Path(args.dump_config).write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n")
    per_class = {c: sum(e.label == c for e in rec.events) for c in CLASSES}
    _emit({"out": str(args.out), "n_events": len(rec.events), "events_per_class": per_class,
           "n_samples": rec.n_samples, "sample_rate_hz": rec.sample_rate_hz,
           "channels": rec.channel_names, "synth_config": cfg.to_dict()})
    return EXIT_OK


def cmd_sync(args) -> int:
    cfg = pipeline_config(args)
    _dump_config(args, cfg)
    rec = load_recording(args.dataset)
    fs = rec.sample_rate_hz
    lo, hi = cfg.filter_band_hz
    bip = recording_bipolar(rec).map(lambda x: bandpass(x, fs, lo, hi))
    _emit(sync_matrix(bip, cfg.sync_band_hz).to_dict())
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = pipeline_config(args)
    rec = load_recording(args.dataset)
    prep = prepare(rec, cfg)
    pair = prep.sync.selected if args.pair == "auto" else args.pair
    fm = prep.pair_features(*pair)
    if cfg.paper_mode:
        fm = global_pca(fm, cfg.pca_fraction)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "features.csv").write_text(fm.to_csv())
    (out / "sync.json").write_text(dumps_json(prep.sync.to_dict()))
    (out / "config.json").write_text(cfg.dumps())
    _dump_config(args, cfg)
    _emit({"rows": fm.rows.shape[0], "columns": fm.rows.shape[1], "pair": list(pair),
           "provenance": fm.provenance, "sync": prep.sync.to_dict()})
    return EXIT_OK


def _evaluate_dataset(prep, cfg: PipelineConfig, classifiers: List[str], pair_mode) -> Dict:
    result = {"sync": prep.sync.to_dict(), "classifiers": {}}
    for kind in classifiers:
        trainer = make_trainer(kind, cfg.train)
        entry = {}
        if pair_mode == "all":
            sweep = per_pair_sweep(prep, trainer, cfg.paper_mode, cfg.pca_fraction)
            rep = sweep.reports[tuple(prep.sync.selected)]
            entry["per_pair"] = sweep.to_dict()
            entry["fig2_csv"] = fig2_csv(sweep)
        else:
            pair = tuple(prep.sync.selected) if pair_mode == "auto" else pair_mode
            rep = evaluate_pair(prep, pair[0], pair[1], trainer, cfg.paper_mode, cfg.pca_fraction)
        entry["report"] = rep.to_dict()
        result["classifiers"][kind] = entry
    return result


def cmd_eval(args) -> int:
    cfg = pipeline_config(args)
    classifiers = list(CLASSIFIERS) if args.classifier == "all" else [cfg.classifier]
    datasets = []
    for path in args.dataset:
        prep = prepare(load_recording(path), cfg)
        res = _evaluate_dataset(prep, cfg, classifiers, args.pair)
        res["dataset"] = str(path)
        datasets.append(res)

    # macro average over datasets (one dataset per subject)
    summary = {}
    table1: Dict[str, Dict[str, float]] = {}
    mean_confusion = {}
    for kind in classifiers:
        entries = [d["classifiers"][kind] for d in datasets]
        sel_name = "FFT Sync" if args.pair in ("auto", "all") else "Pair {}/{}".format(
            *entries[0]["report"]["pair_names"])
        row = {}
        if args.pair == "all":
            row["Without Sync"] = float(np.mean([e["per_pair"]["mean_pct"] for e in entries]))
        row[sel_name] = float(np.mean([e["report"]["accuracy_pct"] for e in entries]))
        table1[kind] = row
        mean_confusion[kind] = np.mean([e["report"]["confusion_pct"] for e in entries], axis=0)
        summary[kind] = {"accuracy_pct": row[sel_name], "table1": row,
                         "confusion_pct": mean_confusion[kind].tolist()}
        if args.pair == "all":
            summary[kind]["per_pair_pct"] = np.mean(
                [[p["accuracy_pct"] for p in e["per_pair"]["pairs"]] for e in entries], axis=0).tolist()

    class_order = datasets[0]["classifiers"][classifiers[0]]["report"]["class_order"]
    tables = {"table1.csv": table1_csv(table1, classifiers)}
    for kind in classifiers:
        suffix = "" if len(classifiers) == 1 else f"_{kind}"
        tables[f"table2{suffix}.csv"] = table2_csv(mean_confusion[kind], class_order)
        if args.pair == "all":
            for i, d in enumerate(datasets):
                tag = "" if len(datasets) == 1 else f"_{i}"
                tables[f"fig2{suffix}{tag}.csv"] = d["classifiers"][kind]["fig2_csv"]
    for d in datasets:
        for e in d["classifiers"].values():
            e.pop("fig2_csv", None)

    report = {"config": cfg.to_dict(), "classifiers": classifiers, "pair_mode":
              args.pair if isinstance(args.pair, str) else list(args.pair),
              "chance_rate_pct": CHANCE_RATE_PCT, "summary": summary, "datasets": datasets}
    if args.out:
        tables["report.json"] = dumps_json(report)
        tables["config.json"] = cfg.dumps()
        write_tables(args.out, tables)
    _dump_config(args, cfg)
    _emit(report)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stnsync", description="FFT-synchronisation pair selection and MKL "
                                            "behaviour classification for bipolar STN-LFP recordings.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic dataset directory")
    s.add_argument("--out", required=True, help="dataset directory to create")
    s.add_argument("--seed", type=int)
    s.add_argument("--trials", type=int, help="trials per class")
    s.add_argument("--coupled-pair", type=_pair, dest="coupled_pair", help="planted pair 'L,R'")
    s.add_argument("--snr", type=float, help="coupling SNR (power ratio)")
    s.add_argument("--config", help="JSON synth config")
    s.add_argument("--dump-config", dest="dump_config", help="write the effective config here")
    s.set_defaults(func=cmd_synth)

    def common(sp):
        sp.add_argument("--config", help="JSON pipeline config (see --dump-config)")
        sp.add_argument("--dump-config", dest="dump_config", help="write the effective config here")
        sp.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"), help="sync band in Hz")
        sp.add_argument("--seed", type=int)

    s = sub.add_parser("sync", help="print the 3x3 synchronisation report")
    s.add_argument("dataset")
    common(s)
    s.set_defaults(func=cmd_sync)

    s = sub.add_parser("features", help="write the feature matrix of one pair as CSV")
    s.add_argument("dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--pair", type=_pair, default="auto", help="'auto' (sync-selected) or 'L,R'")
    s.add_argument("--paper-mode", action="store_true", dest="paper_mode", help="apply a global PCA")
    common(s)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("eval", help="leave-one-out evaluation with accuracy, confusion and per-pair tables")
    s.add_argument("dataset", nargs="+", help="one dataset directory per subject")
    s.add_argument("--classifier", choices=CLASSIFIERS + ("all",))
    s.add_argument("--pair", type=_pair, default="auto", help="'auto', 'all' or 'L,R'")
    s.add_argument("--out", help="directory for CSV tables and report.json")
    s.add_argument("--paper-mode", action="store_true", dest="paper_mode",
                   help="fit PCA once on all trials instead of per fold")
    s.add_argument("--C", type=float, dest="C")
    s.add_argument("--p", type=float, dest="p")
    common(s)
    s.set_defaults(func=cmd_eval)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"stnsync: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"stnsync: convergence error: {exc} (residual {exc.residual:.3g})", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (StnSyncError, OSError) as exc:
        print(f"stnsync: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
