"""Command-line entry point.

Every subcommand accepts ``--config FILE`` (JSON, keys named like the long
flags with dashes replaced by underscores); explicit flags override it.
Errors are reported as one JSON line on stderr with exit codes 2 (config),
3 (data) or 4 (internal).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import analogy, analysis, counts, kbc, plotting, relclass
from .embeddings import EmbeddingFormatError, load_embeddings, normalize, save_embeddings
from .operators import RelationOperator
from .reports import (EvalReport, ReportMismatch, config_digest, file_digest, load_report,
                      merge_reports, write_table)

log = logging.getLogger("relcomp")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

COMMANDS = ("convert", "build-counts", "ppmi", "svd", "nmf", "eval-sat", "eval-semeval",
            "eval-analogy", "eval-diffvec", "eval-kbc", "analyze-sparsity", "analyze-norms",
            "analyze-asymmetry", "report-table")

# settings that never influence results
_NOT_HASHED = {"out", "workers", "overwrite", "config", "command", "verbose"}


class CliError(Exception):
    def __init__(self, code: str, message: str, status: int):
        super().__init__(message)
        self.code = code
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("INVALID_ARGUMENTS", message, EXIT_CONFIG)


COMMON_DEFAULTS = {
    "operator": [op.value for op in RelationOperator],
    "out": "reports",
    "normalize": True,
    "seed": 0,
    "workers": 1,
    "oov": "incorrect",
    "overwrite": False,
}

DEFAULTS = {
    "convert": {"kind": "sat", "casefold": True},
    "build-counts": {"window": 5, "weighting": "inverse-distance", "vocab_size": 50_000,
                     "lowercase": True},
    "ppmi": {},
    "svd": {"k": 300, "seed": 0},
    "nmf": {"d": 300, "max_iter": 200, "tol": 1e-4, "seed": 0},
    "eval-sat": {"casefold": True},
    "eval-semeval": {"casefold": True},
    "eval-analogy": {"casefold": True, "search_vocab": None, "search_limit": None,
                     "task_name": "eval-analogy"},
    "eval-diffvec": {"casefold": True, "mode": "loo", "metric": "cosine", "test_fraction": 0.2},
    "eval-kbc": {"casefold": False, "valid": None, "filtered": False},
    "analyze-sparsity": {"casefold": True, "sample": 140, "pairs": None, "dataset": None,
                         "eps": list(analysis.DEFAULT_EPS_GRID)},
    "analyze-norms": {"casefold": True, "sample": 140, "pairs": None, "dataset": None},
    "analyze-asymmetry": {"casefold": True, "symmetric": [], "folds": 5, "cost": 1.0,
                          "epochs": 300},
    "report-table": {"output": "table.csv"},
}


def _add_eval_common(p, embeddings=True):
    if embeddings:
        p.add_argument("--embedding", action="append", metavar="LABEL=PATH",
                       help="embedding file, optionally labelled; repeatable")
        p.add_argument("--operator", action="append",
                       choices=[op.value for op in RelationOperator])
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-normalize", dest="normalize", action="store_false",
                   help="do not l2-normalise input embeddings")
    p.add_argument("--casefold", dest="casefold", action="store_true")
    p.add_argument("--no-casefold", dest="casefold", action="store_false")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--oov", choices=analogy.OOV_POLICIES)
    p.add_argument("--overwrite", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relcomp", description="Relation composition benchmarks.",
                     argument_default=argparse.SUPPRESS)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON config file")
        return p

    p = cmd("convert", "convert datasets / embeddings to the normalised formats")
    p.add_argument("--kind", choices=["sat", "embeddings"])
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--no-casefold", dest="casefold", action="store_false")

    p = cmd("build-counts", "windowed co-occurrence counts from a text corpus")
    p.add_argument("--corpus")
    p.add_argument("--window", type=int)
    p.add_argument("--weighting", choices=counts.WEIGHTINGS)
    p.add_argument("--vocab-size", type=int)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_false")
    p.add_argument("--output")

    p = cmd("ppmi", "PPMI-reweight a sparse count matrix")
    p.add_argument("--input")
    p.add_argument("--output")

    p = cmd("svd", "truncated SVD embeddings of a sparse matrix")
    p.add_argument("--input")
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")

    p = cmd("nmf", "NMF embeddings of a nonnegative sparse matrix")
    p.add_argument("--input")
    p.add_argument("--d", type=int)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")

    for name, help_ in (("eval-sat", "SAT multiple-choice accuracy"),
                        ("eval-semeval", "SemEval-2012 Task 2 MaxDiff accuracy")):
        p = cmd(name, help_)
        p.add_argument("--dataset")
        _add_eval_common(p)

    p = cmd("eval-analogy", "open-vocabulary analogy completion (Google / MSR)")
    p.add_argument("--dataset")
    p.add_argument("--search-vocab", help="frequency-ranked word list capping the search space")
    p.add_argument("--search-limit", type=int)
    p.add_argument("--task-name", help="task id used in report names (default eval-analogy)")
    _add_eval_common(p)

    p = cmd("eval-diffvec", "1-NN relation classification")
    p.add_argument("--dataset")
    p.add_argument("--mode", choices=["loo", "split"])
    p.add_argument("--metric", choices=relclass.METRICS)
    p.add_argument("--test-fraction", type=float)
    _add_eval_common(p)

    p = cmd("eval-kbc", "knowledge base completion: Mean Rank and Hits@10")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--valid")
    p.add_argument("--filtered", action="store_true")
    _add_eval_common(p)

    for name, help_ in (("analyze-sparsity", "mean sparsity curves per operator"),
                        ("analyze-norms", "average l2 norm of relation vectors")):
        p = cmd(name, help_)
        p.add_argument("--pairs", help="TSV of word pairs (first two columns)")
        p.add_argument("--dataset", help="Google/MSR analogy file to draw (a, b) pairs from")
        p.add_argument("--sample", type=int)
        if name == "analyze-sparsity":
            p.add_argument("--eps", type=float, nargs="+")
        _add_eval_common(p)

    p = cmd("analyze-asymmetry", "direction classification with a linear classifier")
    p.add_argument("--dataset", help="TSV 'w1 w2 relation' of asymmetric relations")
    p.add_argument("--symmetric", action="append", help="pair list of a symmetric relation")
    p.add_argument("--folds", type=int)
    p.add_argument("--cost", type=float)
    p.add_argument("--epochs", type=int)
    _add_eval_common(p)

    p = cmd("report-table", "merge JSON reports into a table CSV")
    p.add_argument("--reports", nargs="+", help="report files or directories")
    p.add_argument("--output")
    return parser


# --- configuration ----------------------------------------------------------

def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    cfg = dict(COMMON_DEFAULTS) if command.startswith(("eval-", "analyze-")) else {}
    cfg.update(DEFAULTS.get(command, {}))
    given = vars(ns)
    if "config" in given:
        try:
            file_cfg = json.loads(Path(given["config"]).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError("MISSING_FILE", f"config file: {exc}", EXIT_CONFIG) from None
        except json.JSONDecodeError as exc:
            raise CliError("INVALID_CONFIG", f"config file is not JSON: {exc}", EXIT_CONFIG) from None
        if not isinstance(file_cfg, dict):
            raise CliError("INVALID_CONFIG", "config file must hold a JSON object", EXIT_CONFIG)
        cfg.update({k.replace("-", "_"): v for k, v in file_cfg.items()})
    cfg.update(given)
    cfg["command"] = command
    for op in cfg.get("operator", []):
        try:
            RelationOperator.parse(op)
        except ValueError as exc:
            raise CliError("INVALID_CONFIG", str(exc), EXIT_CONFIG) from None
    if not isinstance(cfg.get("seed", 0), int):
        raise CliError("INVALID_CONFIG", "seed must be an integer", EXIT_CONFIG)
    return cfg


def _require(cfg, *keys):
    for k in keys:
        if cfg.get(k) in (None, "", []):
            raise CliError("INVALID_CONFIG", f"missing required setting '{k}'", EXIT_CONFIG)


def _path(p) -> Path:
    path = Path(p)
    if not path.exists():
        raise CliError("MISSING_FILE", f"no such file: {p}", EXIT_DATA)
    return path


def _embedding_specs(cfg):
    _require(cfg, "embedding")
    specs = cfg["embedding"]
    if isinstance(specs, str):
        specs = [specs]
    out = []
    for s in specs:
        label, sep, path = s.partition("=")
        if not sep:
            label, path = Path(s).stem, s
        out.append((label, path))
    labels = [lab for lab, _ in out]
    if len(set(labels)) != len(labels):
        raise CliError("INVALID_CONFIG", "embedding labels must be unique", EXIT_CONFIG)
    return out


def _load_store(path, cfg):
    store = load_embeddings(_path(path), casefold=cfg["casefold"])
    return normalize(store) if cfg["normalize"] else store


def _meta(cfg, dataset_files):
    hashed = {k: v for k, v in cfg.items() if k not in _NOT_HASHED}
    return {
        "config_hash": config_digest(hashed),
        "dataset_hash": file_digest([_path(p) for p in dataset_files]),
        "seed": cfg.get("seed"),
        "normalized": cfg.get("normalize"),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _run_jobs(cfg, jobs):
    """Run (label, operator) -> EvalReport callables; results in submission order."""
    workers = max(1, int(cfg.get("workers") or 1))
    if workers == 1:
        return [fn() for fn in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda fn: fn(), jobs))


def _emit(reports, cfg):
    out = Path(cfg["out"])
    written = []
    for r in reports:
        try:
            written.append(r.save(out, overwrite=cfg.get("overwrite", False)))
        except FileExistsError as exc:
            raise CliError("REPORT_EXISTS", f"{exc} (use --overwrite)", EXIT_CONFIG) from None
    for p in written:
        print(p)
    return written


def _evaluate(cfg, task, dataset_files, load_dataset, run_one):
    """Shared driver: one report per (embedding, operator)."""
    specs = _embedding_specs(cfg)
    data = load_dataset()
    meta = _meta(cfg, dataset_files)
    jobs = []
    for label, path in specs:
        store = _load_store(path, cfg)
        for op_name in cfg["operator"]:
            op = RelationOperator.parse(op_name)

            def job(store=store, op=op, label=label):
                rep = run_one(data, store, op)
                rep.task = task
                rep.embedding = label
                rep.meta = dict(meta, dim=store.dim, zero_rows=store.warnings.get("zero_rows", 0))
                return rep
            jobs.append(job)
    return _emit(_run_jobs(cfg, jobs), cfg)


# --- commands ---------------------------------------------------------------

def cmd_convert(cfg):
    _require(cfg, "input", "output")
    src = _path(cfg["input"])
    if cfg["kind"] == "sat":
        qs = analogy.convert_sat_turney(src)
        analogy.write_sat_tsv(qs, cfg["output"])
        print(f"{len(qs)} questions -> {cfg['output']}")
    else:
        store = load_embeddings(src, casefold=cfg["casefold"])
        save_embeddings(store, cfg["output"])
        print(f"{len(store)} x {store.dim} -> {cfg['output']}")


def cmd_build_counts(cfg):
    _require(cfg, "corpus", "output")
    corpus = counts.read_corpus(_path(cfg["corpus"]), lowercase=cfg["lowercase"])
    m = counts.build_cooccurrence(corpus, cfg["window"], cfg["weighting"], cfg["vocab_size"])
    counts.save_matrix(m, cfg["output"])
    print(f"{len(m.vocab)} words, {m.counts.nnz} cells -> {cfg['output']}")


def cmd_ppmi(cfg):
    _require(cfg, "input", "output")
    m = counts.ppmi(counts.load_matrix(_path(cfg["input"])))
    counts.save_matrix(m, cfg["output"])
    print(f"{m.counts.nnz} positive cells -> {cfg['output']}")


def cmd_svd(cfg):
    _require(cfg, "input", "output")
    m = counts.load_matrix(_path(cfg["input"]))
    store = counts.svd_embeddings(m, cfg["k"], seed=cfg["seed"])
    save_embeddings(store, cfg["output"])
    print(f"{len(store)} x {store.dim} -> {cfg['output']}")


def cmd_nmf(cfg):
    _require(cfg, "input", "output")
    m = counts.load_matrix(_path(cfg["input"]))
    store = counts.nmf_embeddings(m, cfg["d"], cfg["max_iter"], cfg["tol"], seed=cfg["seed"])
    save_embeddings(store, cfg["output"])
    print(f"{len(store)} x {store.dim} -> {cfg['output']}")


def cmd_eval_sat(cfg):
    _require(cfg, "dataset")
    return _evaluate(cfg, "eval-sat", [cfg["dataset"]],
                     lambda: analogy.read_sat_tsv(_path(cfg["dataset"])),
                     lambda d, s, op: analogy.eval_sat(d, s, op, oov=cfg["oov"]))


def cmd_eval_semeval(cfg):
    _require(cfg, "dataset")
    return _evaluate(cfg, "eval-semeval", [cfg["dataset"]],
                     lambda: analogy.read_semeval(_path(cfg["dataset"])),
                     lambda d, s, op: analogy.eval_semeval(d, s, op, oov=cfg["oov"]))


def _read_wordlist(path):
    return [ln.split()[0] for ln in Path(path).read_text(encoding="utf-8").splitlines()
            if ln.strip()]


def cmd_eval_analogy(cfg):
    _require(cfg, "dataset")
    files = [cfg["dataset"]] + ([cfg["search_vocab"]] if cfg.get("search_vocab") else [])
    words = _read_wordlist(_path(cfg["search_vocab"])) if cfg.get("search_vocab") else None

    def run(d, s, op):
        rows = (analogy.resolve_search_vocab(s, words, cfg.get("search_limit"))
                if words is not None or cfg.get("search_limit") else None)
        return analogy.eval_analogy_completion(d, s, op, search_vocab=rows, oov=cfg["oov"])

    return _evaluate(cfg, cfg["task_name"], files,
                     lambda: analogy.read_completion(_path(cfg["dataset"])), run)


def cmd_eval_diffvec(cfg):
    _require(cfg, "dataset")
    return _evaluate(cfg, "eval-diffvec", [cfg["dataset"]],
                     lambda: relclass.read_labeled_pairs(_path(cfg["dataset"])),
                     lambda d, s, op: relclass.eval_1nn(d, s, op, mode=cfg["mode"],
                                                        metric=cfg["metric"],
                                                        test_fraction=cfg["test_fraction"],
                                                        seed=cfg["seed"]))


def cmd_eval_kbc(cfg):
    _require(cfg, "train", "test")
    files = [cfg["train"], cfg["test"]] + ([cfg["valid"]] if cfg.get("valid") else [])

    def load():
        train = kbc.read_triples(_path(cfg["train"]))
        test = kbc.read_triples(_path(cfg["test"]))
        valid = kbc.read_triples(_path(cfg["valid"])) if cfg.get("valid") else []
        return train, test, valid

    def run(d, s, op):
        train, test, valid = d
        protos = kbc.build_relation_prototypes(train, s, op)
        known = train + valid + test if cfg["filtered"] else None
        return kbc.eval_kbc(test, protos, s, op, known=known)

    return _evaluate(cfg, "eval-kbc", files, load, run)


def _analysis_pairs(cfg):
    if cfg.get("pairs"):
        pairs = [tuple(p[:2]) for p in (ln.split() for ln in
                 _path(cfg["pairs"]).read_text(encoding="utf-8").splitlines()) if len(p) >= 2]
        src = cfg["pairs"]
    elif cfg.get("dataset"):
        items = analogy.read_completion(_path(cfg["dataset"]))
        pairs = list(dict.fromkeys((it.a, it.b) for it in items))
        src = cfg["dataset"]
    else:
        raise CliError("INVALID_CONFIG", "one of 'pairs' or 'dataset' is required", EXIT_CONFIG)
    return pairs, src


def _in_vocab(pairs, store):
    return [(a, b) for a, b in pairs if a in store and b in store]


def cmd_analyze_sparsity(cfg):
    pairs, src = _analysis_pairs(cfg)
    meta = _meta(cfg, [src])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for label, path in _embedding_specs(cfg):
        store = _load_store(path, cfg)
        sample = analysis.sample_pairs(_in_vocab(pairs, store), cfg["sample"], cfg["seed"])
        curve = analysis.average_sparsity(sample, store, cfg["operator"], cfg["eps"])
        csv_path = out / f"sparsity_{label}.csv"
        curve.to_csv(csv_path)
        plotting.plot_sparsity(curve, out / f"sparsity_{label}.png")
        print(csv_path)
        for op, vals in curve.values.items():
            reports.append(EvalReport(
                task="analyze-sparsity", operator=op, embedding=label,
                metrics={"epsilon": list(curve.epsilon_grid), "mean_sparsity": vals,
                         "pairs": len(sample)},
                meta=dict(meta, dim=store.dim)))
    return _emit(reports, cfg)


def cmd_analyze_norms(cfg):
    pairs, src = _analysis_pairs(cfg)
    meta = _meta(cfg, [src])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    by_op: dict[str, dict[int, float]] = {}
    lines = ["embedding,dim,operator,average_norm"]
    for label, path in _embedding_specs(cfg):
        store = _load_store(path, cfg)
        sample = analysis.sample_pairs(_in_vocab(pairs, store), cfg["sample"], cfg["seed"])
        for op in cfg["operator"]:
            value = analysis.average_norm(sample, store, op)
            by_op.setdefault(op, {})[store.dim] = value
            lines.append(f"{label},{store.dim},{op},{value:.17g}")
            reports.append(EvalReport(task="analyze-norms", operator=op, embedding=label,
                                      metrics={"average_norm": value, "pairs": len(sample)},
                                      meta=dict(meta, dim=store.dim)))
    (out / "norms.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    plotting.plot_norms(by_op, out / "norms.png")
    print(out / "norms.csv")
    return _emit(reports, cfg)


def cmd_analyze_asymmetry(cfg):
    _require(cfg, "dataset")
    triples = [tuple(t) for t in
               ((p.w1, p.w2, p.relation) for p in relclass.read_labeled_pairs(_path(cfg["dataset"])))]
    datasets = analysis.group_by_relation(triples)
    symmetric = []
    for f in cfg.get("symmetric") or []:
        rel = Path(f).stem
        pairs = [tuple(p[:2]) for p in (ln.split() for ln in
                 _path(f).read_text(encoding="utf-8").splitlines()) if len(p) >= 2]
        datasets.append(analysis.DirectionDataset(rel, pairs))
        symmetric.append(rel)
    files = [cfg["dataset"]] + list(cfg.get("symmetric") or [])
    meta = _meta(cfg, files)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for label, path in _embedding_specs(cfg):
        store = _load_store(path, cfg)
        rows = ["operator,relation,kind,accuracy"]
        for op in cfg["operator"]:
            acc = {}
            for ds in datasets:
                usable = analysis.DirectionDataset(ds.relation, _in_vocab(ds.pairs, store))
                if len(usable.pairs) < cfg["folds"]:
                    log.warning("relation %s: too few in-vocabulary pairs, skipped", ds.relation)
                    continue
                acc[ds.relation] = analysis.asymmetry_cv(usable, store, op, cfg["folds"],
                                                         cfg["cost"], cfg["seed"], cfg["epochs"])
                kind = "symmetric" if ds.relation in symmetric else "asymmetric"
                rows.append(f"{op},{ds.relation},{kind},{acc[ds.relation]:.17g}")
            plotting.plot_asymmetry(acc, out / f"asymmetry_{label}_{op}.png", symmetric=symmetric)
            asym = [v for k, v in acc.items() if k not in symmetric]
            sym = [v for k, v in acc.items() if k in symmetric]
            reports.append(EvalReport(
                task="analyze-asymmetry", operator=op, embedding=label,
                accuracy=sum(acc.values()) / len(acc) if acc else None,
                per_category=acc,
                metrics={"mean_asymmetric": sum(asym) / len(asym) if asym else None,
                         "mean_symmetric": sum(sym) / len(sym) if sym else None,
                         "folds": cfg["folds"], "cost": cfg["cost"]},
                meta=dict(meta, dim=store.dim)))
        (out / f"asymmetry_{label}.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        print(out / f"asymmetry_{label}.csv")
    return _emit(reports, cfg)


def cmd_report_table(cfg):
    _require(cfg, "reports")
    paths = []
    for p in cfg["reports"]:
        p = _path(p)
        paths.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    reports = [load_report(p) for p in paths]
    reports = [r for r in reports if r.task.startswith("eval")]
    if not reports:
        raise CliError("NO_REPORTS", "no evaluation reports found", EXIT_DATA)
    try:
        header, body = merge_reports(reports)
    except ReportMismatch as exc:
        raise CliError("DATASET_MISMATCH", str(exc), EXIT_DATA) from None
    write_table(header, body, cfg["output"])
    print(cfg["output"])


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in COMMANDS}


def _fail(err: CliError) -> int:
    sys.stderr.write(json.dumps({"error": err.code, "message": str(err)}) + "\n")
    return err.status


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is not None and first not in COMMANDS:
        return _fail(CliError("UNKNOWN_COMMAND", f"unknown command {first!r}",
                              EXIT_CONFIG))
    try:
        ns = build_parser().parse_args(argv)
        if getattr(ns, "command", None) is None:
            raise CliError("UNKNOWN_COMMAND", "no command given", EXIT_CONFIG)
        verbose = getattr(ns, "verbose", False)
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        command = ns.command
        del ns.command
        if hasattr(ns, "verbose"):
            del ns.verbose
        cfg = resolve_config(command, ns)
        HANDLERS[command](cfg)
        return EXIT_OK
    except CliError as err:
        return _fail(err)
    except (EmbeddingFormatError, FileNotFoundError) as err:
        return _fail(CliError("DATA_ERROR", str(err), EXIT_DATA))
    except (ValueError, KeyError) as err:
        return _fail(CliError("DATA_ERROR", str(err), EXIT_DATA))
    except Exception as err:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        return _fail(CliError("INTERNAL_ERROR", f"{type(err).__name__}: {err}", EXIT_INTERNAL))


if __name__ == "__main__":
    sys.exit(main())
