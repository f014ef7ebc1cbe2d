"""Command-line harness: gen, listlearn, refclass, predict, evaluate.

Every subcommand reads one JSON config (``--config``). Exit codes: 0 success,
2 config error, 3 data error (including library failures on the data),
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import DomainError, LabeledSample, WellBehavedParams
from .data import DataError, Dataset, center_normalize, load_csv, split
from .listlearn import ListLearnConfig, sparse_list
from .perpredict import (
    CandidatePool,
    ListLearningError,
    NoSupportedCandidateError,
    PerPredictConfig,
    build_pool,
)
from .refclass import NoValidCandidateError, RefClassConfig, learn_reference_class
from .synth import SyntheticSpec, draw

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4
TASKS = ("gen", "listlearn", "refclass", "predict", "evaluate")
TOP_KEYS = {
    "task", "seed", "data", "split", "listlearn", "refclass", "perpredict",
    "query", "query_index", "trials", "max_queries", "probe_count",
}


class ConfigError(ValueError):
    pass


class InvariantError(AssertionError):
    pass


# --------------------------------------------------------------------------
# Config parsing
# --------------------------------------------------------------------------


def _block(cfg: dict, key: str, allowed: set[str]) -> dict:
    b = cfg.get(key) or {}
    if not isinstance(b, dict):
        raise ConfigError(f"'{key}' must be an object")
    unknown = set(b) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{key}': {sorted(unknown)}; allowed: {sorted(allowed)}")
    return b


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(cfg) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}; allowed: {sorted(TOP_KEYS)}")
    data = _block(cfg, "data", {"csv", "synthetic", "normalize"})
    if ("csv" in data) == ("synthetic" in data):
        raise ConfigError("'data' needs exactly one of 'csv' or 'synthetic'")
    if "csv" in data:
        c = data["csv"]
        for k in ("path", "label_column", "positive_label"):
            if k not in c:
                raise ConfigError(f"'data.csv' is missing '{k}'")
        p = Path(c["path"])
        if not p.is_absolute():
            p = path.parent / p
        if not p.is_file():
            raise ConfigError(f"data file not found: {p}")
        c["path"] = str(p)
    else:
        s = data["synthetic"]
        if "spec" not in s or "n" not in s:
            raise ConfigError("'data.synthetic' needs 'spec' and 'n'")
    return cfg


def _construct(kind, what: str, **kw):
    try:
        return kind(**kw)
    except (DomainError, TypeError, ValueError) as e:
        raise ConfigError(f"bad '{what}' block: {e}") from None


def _build_listlearn(cfg: dict) -> ListLearnConfig:
    b = _block(cfg, "listlearn", {"sparsity", "bit_budget", "subsample_size", "dedup_tolerance"})
    return _construct(ListLearnConfig, "listlearn", **b)


def _build_refclass(cfg: dict, default_params: WellBehavedParams) -> RefClassConfig:
    b = dict(_block(cfg, "refclass", {
        "epsilon", "delta", "params", "train_size", "validation_size",
        "sample_multiplier", "iterations", "step", "max_iterations",
    }))
    p = b.pop("params", None)
    params = default_params if p is None else _construct(WellBehavedParams, "refclass.params", **p)
    b.setdefault("epsilon", 0.1)
    return _construct(RefClassConfig, "refclass", params=params, **b)


def _build_perpredict(cfg: dict, params: WellBehavedParams, seed: int) -> PerPredictConfig:
    b = dict(_block(cfg, "perpredict", {"opt", "selection_size", "selection_fraction", "validation_fraction"}))
    if isinstance(b.get("opt"), list):
        b["opt"] = tuple(b["opt"])
    return _construct(
        PerPredictConfig,
        "perpredict",
        listlearn=_build_listlearn(cfg),
        refclass=_build_refclass(cfg, params),
        seed=seed,
        **b,
    )


@dataclass
class Source:
    dataset: Dataset
    params: WellBehavedParams
    normalize: bool
    synthetic: SyntheticSpec | None = None


def _load_source(cfg: dict, seed: int) -> Source:
    data = cfg["data"]
    if "csv" in data:
        c = data["csv"]
        ds = load_csv(c["path"], c["label_column"], c["positive_label"], c.get("categorical_columns", ()))
        if len(ds) == 0:
            raise DataError(f"{c['path']}: no complete rows")
        from .synth import gaussian_params

        return Source(ds, gaussian_params(1.0), bool(data.get("normalize", True)))
    s = data["synthetic"]
    try:
        spec = SyntheticSpec.from_dict(s["spec"])
    except (DomainError, TypeError, KeyError, ValueError) as e:
        raise ConfigError(f"bad synthetic spec: {e}") from None
    sample = draw(spec, int(s["n"]), seed=spec.seed if seed is None else seed)
    names = [f"x{j}" for j in range(spec.dim)]
    ds = Dataset(sample.X, sample.y, names, {"synthetic": spec.to_dict(), "n": int(s["n"])})
    return Source(ds, spec.marginal.params(spec.dim), bool(data.get("normalize", False)), spec)


def _prepared(src: Source) -> Dataset:
    return center_normalize(src.dataset) if src.normalize else src.dataset


def _query(cfg: dict, ds: Dataset) -> tuple[np.ndarray, dict]:
    if "query" in cfg and "query_index" in cfg:
        raise ConfigError("give only one of 'query' and 'query_index'")
    if "query_index" in cfg:
        i = int(cfg["query_index"])
        if not 0 <= i < len(ds):
            raise ConfigError(f"query_index {i} out of range for {len(ds)} rows")
        return ds.features[i], {"query_index": i}
    if "query" not in cfg:
        raise ConfigError("this task needs 'query' or 'query_index'")
    raw = np.asarray(cfg["query"], dtype=np.float64)
    if ds.preprocessing is not None:
        if raw.shape[0] != len(ds.preprocessing.keep) + len(ds.preprocessing.dropped):
            raise ConfigError("query length does not match the raw feature count")
        q = ds.preprocessing.apply_query(raw)
    else:
        q = raw
    if q.shape != (ds.dim,):
        raise ConfigError(f"query must have {ds.dim} entries")
    return q, {"query": [float(v) for v in raw]}


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: str | None, suffix: str | None = None):
    if out is None:
        sys.stdout.write(text)
        return
    p = Path(out) if suffix is None else Path(out).with_suffix(suffix)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def sample_to_csv(sample: LabeledSample) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j}" for j in range(sample.dim)] + ["y"])
    for x, y in zip(sample.X, sample.y):
        w.writerow([repr(float(v)) for v in x] + [int(y)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_gen(cfg: dict, seed: int, out, jobs: int):
    if "synthetic" not in cfg["data"]:
        raise ConfigError("gen needs a 'data.synthetic' source")
    src = _load_source(cfg, seed)
    _emit(sample_to_csv(src.dataset.sample()), out)


def cmd_listlearn(cfg: dict, seed: int, out, jobs: int):
    src = _load_source(cfg, seed)
    ds = _prepared(src)
    res = sparse_list(ds.sample(), _build_listlearn(cfg), seed=seed)
    _emit(_dumps({
        "nu": res.nu,
        "tuples_attempted": res.tuples_attempted,
        "solved": res.solved,
        "clamped": res.clamped,
        "subsample_indices": [int(i) for i in res.subsample_indices],
        "classifiers": [c.to_dict() for c in res.classifiers],
    }), out)


def cmd_refclass(cfg: dict, seed: int, out, jobs: int):
    src = _load_source(cfg, seed)
    ds = _prepared(src)
    q, qinfo = _query(cfg, ds)
    pp = _build_perpredict(cfg, src.params, seed)
    n = len(ds)
    perm = np.random.default_rng(seed).permutation(n)
    n_val = math.ceil(pp.validation_fraction * n)
    if n_val >= n:
        raise DataError(f"{n} rows are too few for a train/validation split")
    sample = ds.sample()
    train, val = sample.subset(np.sort(perm[n_val:])), sample.subset(np.sort(perm[:n_val]))
    h, info = learn_reference_class(train, val, q, pp.refclass, return_details=True)
    if not (abs(np.linalg.norm(h.normal) - 1) < 1e-9 and np.dot(h.normal, q) >= -1e-10):
        raise InvariantError("reference class lost unit norm or query containment")
    _emit(_dumps({
        **qinfo,
        "halfspace": h.to_dict(),
        "iterate": info["iterate"],
        "validation_rate": info["validation_rate"],
        "T": info["T"],
        "step": info["step"],
        "iterates": [[float(v) for v in w] for w in info["iterates"]],
    }), out)


def _check_result(r, q: np.ndarray):
    if int(r.pair.classifier.predict(q)) != r.label:
        raise InvariantError("stored label differs from the stored classifier at the query")
    if np.dot(r.pair.halfspace.normal, q) < -1e-10:
        raise InvariantError("returned halfspace does not contain the query")
    e = r.pair.empirical_error
    if e is not None and not 0 <= e <= 1:
        raise InvariantError("conditional error outside [0, 1]")


def cmd_predict(cfg: dict, seed: int, out, jobs: int):
    src = _load_source(cfg, seed)
    ds = _prepared(src)
    q, qinfo = _query(cfg, ds)
    pp = _build_perpredict(cfg, src.params, seed)
    probe_count = cfg.get("probe_count")
    pool = build_pool(ds.sample(), pp)
    r = pool.predict(q)
    _check_result(r, q)
    doc = {**qinfo, "result": r.to_dict()}
    if probe_count is not None:
        from .perpredict import conditional_classify

        pair = conditional_classify(ds.sample(), pp, int(probe_count), candidates=pool.list_result, seed=seed)
        doc["conditional_classifier"] = pair.to_dict()
    _emit(_dumps(doc), out)


_WORKER_POOL: CandidatePool | None = None


def _init_worker(pool: CandidatePool):
    global _WORKER_POOL
    _WORKER_POOL = pool


def _predict_one(q: np.ndarray, pool: CandidatePool | None = None) -> dict:
    pool = pool or _WORKER_POOL
    try:
        r = pool.predict(q)
    except (NoSupportedCandidateError, NoValidCandidateError, DomainError) as e:
        return {"error": str(e)}
    _check_result(r, q)
    return r.to_dict()


def _run_queries(pool: CandidatePool, Q: np.ndarray, jobs: int) -> list[dict]:
    if jobs <= 1 or len(Q) < 2:
        return [_predict_one(q, pool) for q in Q]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(pool,)) as ex:
        return list(ex.map(_predict_one, Q, chunksize=max(1, len(Q) // (4 * jobs))))


def evaluate_trial(src: Source, cfg: dict, seed: int, jobs: int) -> dict:
    frac = float(_block(cfg, "split", {"train_fraction"}).get("train_fraction", 2.0 / 3.0))
    tr, te = split(src.dataset, frac, seed=seed, normalize=src.normalize)
    pp = _build_perpredict(cfg, src.params, seed)
    t0 = time.perf_counter()
    pool = build_pool(tr.sample(), pp)
    t_list = time.perf_counter() - t0
    max_q = cfg.get("max_queries")
    n_q = len(te) if max_q is None else min(len(te), int(max_q))
    Q, Y = te.features[:n_q], te.labels[:n_q]
    t0 = time.perf_counter()
    results = _run_queries(pool, Q, jobs)
    t_query = time.perf_counter() - t0

    records, wrong, ok = [], 0, 0
    for i, (r, q, y) in enumerate(zip(results, Q, Y)):
        rec = {"query_id": i, "query": [float(v) for v in q], "true_label": int(y)}
        if "error" in r:
            rec["error"] = r["error"]
        else:
            ok += 1
            wrong += int(r["label"] != y)
            rec.update({
                "label": r["label"],
                "classifier": r["pair"]["classifier"]["terms"],
                "normal": r["pair"]["halfspace"]["normal"],
                "support_count": r["pair"]["support_count"],
                "conditional_error": r["pair"]["empirical_error"],
                "opt": r["opt"],
                "fallback_label": r["fallback_label"],
            })
        records.append(rec)
    sparse_c, sparse_acc = pool.best_global(tr.sample())
    # scored on the same queries as Pers
    sparse_err = float(np.mean(sparse_c.predict(Q) != Y)) if n_q else None
    pers_err = wrong / ok if ok else None
    for e in (pers_err, sparse_err):
        if e is not None and not 0 <= e <= 1:
            raise InvariantError("error rate outside [0, 1]")
    list_info = pool.list_result
    return {
        "seed": seed,
        "n_train": len(tr),
        "n_test": len(te),
        "n_queries": n_q,
        "dim": tr.dim,
        "list_size": len(pool.classifiers),
        "distinct_candidates": pool.distinct,
        "list_clamped": None if list_info is None else list_info.clamped,
        "failures": n_q - ok,
        "errors": {"pers": pers_err, "sparse": sparse_err},
        "sparse_classifier": sparse_c.to_dict(),
        "sparse_train_accuracy": sparse_acc,
        "records": records,
        "_timing": {"list_seconds": t_list, "query_seconds": t_query},
    }


def _median(xs):
    xs = [x for x in xs if x is not None]
    return statistics.median(xs) if xs else None


def _table(trials: list[dict]) -> str:
    head = ["trial", "seed", "n_train", "n_test", "list", "distinct", "fail", "Pers", "Sparse"]
    rows = []
    fmt = lambda e: "-" if e is None else f"{e:.4f}"
    for k, t in enumerate(trials):
        rows.append([str(k), str(t["seed"]), str(t["n_train"]), str(t["n_test"]), str(t["list_size"]),
                     str(t["distinct_candidates"]), str(t["failures"]), fmt(t["errors"]["pers"]),
                     fmt(t["errors"]["sparse"])])
    rows.append(["median", "", "", "", "", "", "",
                 fmt(_median(t["errors"]["pers"] for t in trials)),
                 fmt(_median(t["errors"]["sparse"] for t in trials))])
    widths = [max(len(r[j]) for r in [head] + rows) for j in range(len(head))]
    line = lambda r: "  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip()
    return "\n".join([line(head), line(["-" * w for w in widths])] + [line(r) for r in rows]) + "\n"


def cmd_evaluate(cfg: dict, seed: int, out, jobs: int) -> dict:
    started = time.time()
    trials_n = int(cfg.get("trials", 1))
    if trials_n < 1:
        raise ConfigError("'trials' must be >= 1")
    src = _load_source(cfg, seed)
    trials, timing = [], []
    for t in range(trials_n):
        tr = evaluate_trial(src, cfg, seed + t, jobs)
        timing.append(tr.pop("_timing"))
        trials.append(tr)
    report = {
        "config": cfg,
        "data": {"n": len(src.dataset), "dim": src.dataset.dim, "report": src.dataset.report,
                 "normalized": src.normalize},
        "trials": trials,
        "summary": {
            "pers_error_median": _median(t["errors"]["pers"] for t in trials),
            "sparse_error_median": _median(t["errors"]["sparse"] for t in trials),
            "pers_errors": [t["errors"]["pers"] for t in trials],
            "sparse_errors": [t["errors"]["sparse"] for t in trials],
        },
        "metadata": {
            "version": __version__,
            "seed": seed,
            "jobs": jobs,
            "started_unix": started,
            "duration_seconds": time.time() - started,
            "trial_timing": timing,
        },
    }
    _emit(_dumps(report), out)
    if out is not None:
        _emit(_table(trials), out, ".txt")
    return report


COMMANDS = {
    "gen": cmd_gen,
    "listlearn": cmd_listlearn,
    "refclass": cmd_refclass,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perspred", description="Personalized prediction with sparse classifiers and reference classes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="task", required=True)
    for name in TASKS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        s.add_argument("--jobs", type=int, default=None, help="parallel workers (default: available cores)")
        s.add_argument("--out", default=None, help="output path (default: stdout)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.get("task") not in (None, args.task):
            raise ConfigError(f"config task {cfg['task']!r} does not match subcommand {args.task!r}")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        COMMANDS[args.task](cfg, seed, args.out, jobs)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DataError, DomainError, OSError, ListLearningError, NoSupportedCandidateError, NoValidCandidateError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
