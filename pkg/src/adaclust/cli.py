"""Command-line entry point: ``adaclust {generate,train,evaluate,compare}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import Dataset, GeneratorSpec, generate, load_features, save_features
from .encoder import load_checkpoint, save_checkpoint
from .errors import AdaclustError, ParameterError
from .metrics import confusion, report
from .pipeline import METRIC_KEYS, MODES, RunConfig, aggregate, fold_indices, predict_parents, run
from .subclasses import SubClassMap

log = logging.getLogger("adaclust")

REPORT_SCHEMA_VERSION = 1
CONFIG_KEYS = ("dataset", "modes", "seeds", "n_jobs", "save_checkpoints", "schema_version")
OURS = "clustering_triplet"


class CliError(Exception):
    pass


def _read_json(path) -> dict:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise CliError(f"{path}: expected a JSON object")
    return doc


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


class Experiment:
    """A parsed config file: dataset source, modes, seeds and run settings."""

    def __init__(self, doc: dict, base_dir: Path, seed_override=None):
        self.doc = doc
        self.base_dir = base_dir
        run_fields = {k: v for k, v in doc.items() if k not in CONFIG_KEYS}
        modes = doc.get("modes") or [run_fields.get("mode", OURS)]
        self.modes = list(modes)
        for m in self.modes:
            if m not in MODES:
                raise CliError(f"modes: unknown mode {m!r}")
        run_fields.pop("mode", None)
        self.run_fields = run_fields
        seeds = doc.get("seeds") or [run_fields.get("seed", 0)]
        if seed_override is not None:
            seeds = [seed_override]
        self.seeds = [int(s) for s in seeds]
        run_fields.pop("seed", None)
        self.n_jobs = int(doc.get("n_jobs", 1))
        self.save_checkpoints = bool(doc.get("save_checkpoints", True))
        if "dataset" not in doc:
            raise CliError("dataset: missing (give {\"csv\": path} or {\"generator\": {...}})")
        self.dataset = doc["dataset"]
        # validate run fields once up front
        self.config(self.modes[0], self.seeds[0])

    def config(self, mode: str, seed: int) -> RunConfig:
        try:
            return RunConfig.from_dict({**self.run_fields, "mode": mode, "seed": seed})
        except (ParameterError, TypeError) as exc:
            raise CliError(f"config: {exc}") from None

    def data(self, seed: int) -> Dataset:
        ds = self.dataset
        if "csv" in ds:
            path = Path(ds["csv"])
            if not path.is_absolute():
                path = self.base_dir / path
            if not path.exists():
                raise CliError(f"dataset.csv: file not found: {path}")
            return load_features(path)
        if "generator" in ds:
            gen = dict(ds["generator"])
            if ds.get("reseed", False):
                gen["seed"] = seed
            try:
                return generate(GeneratorSpec.from_dict(gen))
            except (ParameterError, TypeError) as exc:
                raise CliError(f"dataset.generator: {exc}") from None
        raise CliError("dataset: needs a 'csv' or 'generator' entry")

    def echo(self) -> dict:
        return {**self.doc, "modes": self.modes, "seeds": self.seeds}


def run_experiment(exp: Experiment, out_dir: Path | None = None) -> dict:
    """Every (mode, seed) pair on shared folds; returns the report document."""
    runs, per_mode, splits = [], {m: [] for m in exp.modes}, {}
    for seed in exp.seeds:
        data = exp.data(seed)
        # fold assignment depends on seed, fold count and labels only, so
        # every mode of this seed sees the same splits
        splits[str(seed)] = [f.tolist() for f in fold_indices(exp.config(exp.modes[0], seed), data)]
        for mode in exp.modes:
            cfg = exp.config(mode, seed)
            log.info("running mode=%s seed=%d", mode, seed)
            result = run(cfg, data, n_jobs=exp.n_jobs)
            per_mode[mode].extend(f.best_report for f in result.folds)
            runs.append({"mode": mode, "seed": seed, **result.to_dict()})
            if out_dir is not None and exp.save_checkpoints:
                ck_dir = out_dir / "checkpoints"
                ck_dir.mkdir(parents=True, exist_ok=True)
                for f in result.folds:
                    meta = {"class_names": data.class_names, "mode": mode, "seed": seed,
                            "fold": f.fold, "best_epoch": f.best_epoch,
                            "counts": f.best_map.counts.tolist()}
                    save_checkpoint(ck_dir / f"{mode}_seed{seed}_fold{f.fold}.npz", f.best_model, meta)
    summary = {m: aggregate(reps) for m, reps in per_mode.items()}
    return {"schema_version": REPORT_SCHEMA_VERSION, "config": exp.echo(),
            "summary": summary, "splits": splits, "runs": runs}


def ranked_rows(summary: dict) -> list[dict]:
    rows = [{"mode": m, **vals} for m, vals in summary.items()]
    rows.sort(key=lambda r: (-r["f_score"], r["mode"]))
    ours = summary.get(OURS)
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
        if ours is None or row["mode"] == OURS:
            row["ours_ge"] = ""
        else:
            row["ours_ge"] = "yes" if ours["f_score"] >= row["f_score"] else "no"
    return rows


def format_table(rows: list[dict]) -> str:
    cols = ["rank", "mode", *METRIC_KEYS, "ours_ge"]
    cells = [cols] + [[repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_rows_csv(path, rows: list[dict]) -> None:
    cols = ["schema_version", "rank", "mode", *METRIC_KEYS, "ours_ge"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([REPORT_SCHEMA_VERSION, r["rank"], r["mode"],
                        *(repr(r[k]) for k in METRIC_KEYS), r["ours_ge"]])


def cmd_generate(args) -> int:
    doc = _read_json(args.spec)
    if "dataset" in doc:
        doc = doc["dataset"].get("generator", {})
    elif "generator" in doc:
        doc = doc["generator"]
    try:
        spec = GeneratorSpec.from_dict(doc)
    except (ParameterError, TypeError) as exc:
        raise CliError(f"{args.spec}: {exc}") from None
    if args.seed is not None:
        spec.seed = args.seed
    data = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_features(data, out / "features.csv")
    _write_json(out / "ground_truth.json", {
        "schema_version": REPORT_SCHEMA_VERSION,
        "spec": spec.to_dict(),
        "class_names": data.class_names,
        "parent_labels": data.parent_labels.tolist(),
        "mode_ids": data.mode_ids.tolist(),
    })
    print(f"wrote {len(data)} rows to {out / 'features.csv'}")
    return 0


def _load_experiment(args) -> Experiment:
    path = Path(args.config)
    return Experiment(_read_json(path), path.parent, getattr(args, "seed", None))


def cmd_train(args) -> int:
    exp = _load_experiment(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = run_experiment(exp, out)
    _write_json(out / "report.json", doc)
    print(format_table(ranked_rows(doc["summary"])))
    return 0


def cmd_compare(args) -> int:
    exp = _load_experiment(args)
    if len(exp.modes) < 2:
        raise CliError("modes: compare needs at least two modes")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = run_experiment(exp, out)
    rows = ranked_rows(doc["summary"])
    doc["ranking"] = rows
    _write_json(out / "compare.json", doc)
    write_rows_csv(out / "compare.csv", rows)
    print(format_table(rows))
    return 0


def cmd_evaluate(args) -> int:
    try:
        model, meta = load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        raise CliError(f"{args.checkpoint}: file not found") from None
    data = load_features(args.data)
    names = meta.get("class_names")
    if names is None or "counts" not in meta:
        raise CliError(f"{args.checkpoint}: checkpoint lacks class names or sub-class counts")
    index = {n: i for i, n in enumerate(names)}
    unknown = sorted(set(data.class_names) - set(index))
    if unknown:
        raise CliError(f"{args.data}: labels not known to the checkpoint: {', '.join(unknown)}")
    truth = np.array([index[data.class_names[c]] for c in data.parent_labels], dtype=np.int64)
    submap = SubClassMap(meta["counts"], np.zeros(0, dtype=np.int64))
    if submap.n_pseudo != model.n_outputs:
        raise CliError(f"{args.checkpoint}: head size does not match sub-class counts")
    pred = predict_parents(model, data.features, submap)
    rep = report(confusion(truth, pred, len(names), names))
    doc = {"schema_version": REPORT_SCHEMA_VERSION, "checkpoint": str(args.checkpoint),
           "data": str(args.data), "report": rep.to_dict()}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaclust", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic feature CSV and its ground truth")
    g.add_argument("--spec", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train and cross-validate the configured mode(s)")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint on a feature CSV")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="run several modes on identical folds and rank them")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, AdaclustError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
