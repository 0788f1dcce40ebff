"""Command-line surface: corpus building, indexing, training-sample
export, batch correction, and evaluation.

Every output file is written atomically and starts with a header record
carrying the resolved config hash and seed; reruns with identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .config import RunConfig, resolve_config
from .contrastive import build_training_samples, extract_error_chars, save_samples
from .errors import (
    EXIT_BACKEND,
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    BackendError,
    ConfigError,
    DataError,
    TextmendError,
)
from .fileio import make_header, read_jsonl
from .llm import ChatBackendConfig, HttpChatBackend, ScriptedChatBackend, load_mock_script
from .metrics import (
    EvalItem,
    cer,
    cerr,
    length_satisfies,
    round_histogram,
    sentence_prf,
)
from .pipeline import (
    correct_batch,
    load_predictions,
    save_predictions,
)
from .report import EvalSummary, MetricRow, format_percent, write_report
from .retrieval import (
    HashEmbedBackend,
    HttpEmbedBackend,
    Retriever,
    index_corpus,
    load_index,
    save_index,
)
from .tasks import TaskKind, load_nbest, load_pairs, load_tasks


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse calls sys.exit(2) on errors; surface them as exit code 1
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="textmend", description="retrieval-augmented text correction")
    sub = parser.add_subparsers(dest="command", metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--seed", type=int, help="run seed (recorded in headers)")
    common.add_argument("--workers", type=int, help="worker pool size (0 = cpu count)")

    chatopts = argparse.ArgumentParser(add_help=False)
    chatopts.add_argument("--mock-script", help="scripted replies file, one per line")
    chatopts.add_argument("--backend-url", help="OpenAI-compatible chat endpoint")
    chatopts.add_argument("--model", help="chat model name")

    embedopts = argparse.ArgumentParser(add_help=False)
    embedopts.add_argument("--embed-url", help="embedding service endpoint")
    embedopts.add_argument("--embed-dim", type=int, help="offline embedder dimension")
    embedopts.add_argument("--batch-size", type=int, help="embedding batch size")

    p = sub.add_parser(
        "build-corpus",
        parents=[common, chatopts],
        help="build the retrieval corpus from training pairs, terms, and expansions",
    )
    p.add_argument("--pairs", help="training pair dataset (source/target records)")
    p.add_argument("--terms", help="domain term list, one per line")
    p.add_argument("--background-for", help="dataset to generate background docs for")
    p.add_argument(
        "--background-task",
        default="spelling",
        help="task kind of the --background-for dataset",
    )
    p.add_argument("--domain-tag", default="", help="corpus domain label")
    p.add_argument("--no-expand", action="store_true", help="skip LLM expansions")
    p.add_argument("--out", required=True, help="corpus output path")

    p = sub.add_parser(
        "index",
        parents=[common, embedopts],
        help="embed the corpus and write the vector index",
    )
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="index output path")

    p = sub.add_parser(
        "make-train-data",
        parents=[common, embedopts],
        help="mine contrastive training samples from spelling pairs",
    )
    p.add_argument("--pairs", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", help="prebuilt index (embedded on the fly when absent)")
    p.add_argument("--n-neg", type=int, help="negatives per sample")
    p.add_argument("--out", required=True)

    p = sub.add_parser(
        "correct",
        parents=[common, chatopts, embedopts],
        help="run batch correction over a dataset",
    )
    p.add_argument("--dataset", required=True)
    p.add_argument("--task", required=True, help="spelling | splitting | nbest")
    p.add_argument(
        "--mode",
        default="adaptive",
        choices=["adaptive", "direct", "retrieval"],
        help="correction strategy",
    )
    p.add_argument("--corpus", help="retrieval corpus (also carries background docs)")
    p.add_argument("--index", help="vector index over the corpus")
    p.add_argument(
        "--no-training-set",
        action="store_true",
        help="treat the domain as having no training corpus (swaps method order)",
    )
    p.add_argument("--mock-script-alt", help="scripted replies for the fallback method")
    p.add_argument("--top-k", type=int, help="retrieved sentences per prompt")
    p.add_argument("--rounds", type=int, help="reflection round limit")
    p.add_argument("--adse-limit", type=int, help="failed attempts before switching")
    p.add_argument("--nbest-top", type=int, help="candidates kept from each N-best list")
    p.add_argument("--out", required=True, help="predictions output path")

    p = sub.add_parser(
        "evaluate",
        parents=[common],
        help="score predictions against references and render the report",
    )
    p.add_argument("--dataset", required=True)
    p.add_argument("--task", required=True, help="spelling | splitting | nbest")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out-dir", help="where to write metrics.tsv and figures")
    p.add_argument("--baseline-cer", type=float, help="baseline CER for the reduction row")
    p.add_argument("--macro-cer", action="store_true", help="average per-item CERs")
    p.add_argument("--max-rounds", type=int, help="histogram width (defaults to --rounds)")
    p.add_argument("--rounds", type=int, help=argparse.SUPPRESS)
    p.add_argument("--nbest-top", type=int, help=argparse.SUPPRESS)

    return parser


_FLAG_KEYS = {
    "seed": "seed",
    "workers": "workers",
    "model": "model",
    "backend_url": "backend_url",
    "embed_url": "embed_url",
    "embed_dim": "embed_dim",
    "batch_size": "batch_size",
    "n_neg": "n_neg",
    "top_k": "retrieve_top_k",
    "rounds": "mlr_rounds",
    "adse_limit": "adse_limit",
    "nbest_top": "nbest_top",
}


def _config_from(args: argparse.Namespace) -> RunConfig:
    flags = {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            flags[key] = value
    return resolve_config(file_path=getattr(args, "config", None), flags=flags)


def _embedder(cfg: RunConfig, header: dict | None = None):
    """Embedding backend; a saved index header pins the offline embedder
    geometry so queries embed the same way the corpus did."""
    if cfg.embed_url:
        return HttpEmbedBackend(cfg.embed_url, timeout=cfg.timeout, max_retries=cfg.max_retries)
    if header and header.get("embedder") == "hash":
        return HashEmbedBackend(dim=header["dim"], seed=header.get("embed_seed", cfg.seed))
    return HashEmbedBackend(dim=cfg.embed_dim, seed=cfg.seed)


def _chat_factory(cfg: RunConfig, args: argparse.Namespace, script_attr: str = "mock_script"):
    """Per-task chat backend factory.

    Scripted mode hands every task a fresh replay of the same script, so
    batch output does not depend on worker scheduling.
    """
    script = getattr(args, script_attr, None)
    if script:
        entries = load_mock_script(script)
        return lambda task=None: ScriptedChatBackend(entries, exhaustion="repeat_last")
    if cfg.backend_url:
        backend = HttpChatBackend(
            ChatBackendConfig(
                endpoint=cfg.backend_url,
                model=cfg.model,
                timeout=cfg.timeout,
                max_retries=cfg.max_retries,
                temperature=cfg.temperature,
            )
        )
        return lambda task=None: backend
    return None


def _cmd_build_corpus(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    factory = _chat_factory(cfg, args)
    pairs = load_pairs(args.pairs) if args.pairs else []
    terms = corpus_mod.load_terms(args.terms) if args.terms else []

    train_docs = corpus_mod.ingest_training_targets(pairs)
    expansion_docs: list = []
    term_docs: list = []
    if factory is not None and not args.no_expand:
        # Scripted replies are consumed in input order, so expansion runs
        # single-file under a mock; live backends use the worker pool.
        workers = 1 if args.mock_script else cfg.effective_workers()
        llm = factory()
        targets = [d.text for d in train_docs]
        for doc_lists in corpus_mod.expand_sentences(targets, llm, max_workers=workers):
            expansion_docs.extend(doc_lists)
        if terms:
            term_docs = corpus_mod.expand_terms(terms, llm, max_workers=workers)
    elif terms and factory is None:
        raise ConfigError("term expansion needs --mock-script or --backend-url")

    built = corpus_mod.build_corpus(
        train_docs, expansion_docs, term_docs, domain_tag=args.domain_tag
    )
    docs = list(built.docs)

    background_count = 0
    if args.background_for:
        if factory is None:
            raise ConfigError("background generation needs --mock-script or --backend-url")
        kind = TaskKind.parse(args.background_task)
        bg_tasks = load_tasks(args.background_for, kind)
        llm = factory()
        for task in bg_tasks:
            for doc in corpus_mod.generate_background(task.query_text, llm, source_id=task.id):
                docs.append(
                    corpus_mod.CorpusDoc(
                        doc_id=f"bg{background_count:06d}",
                        text=doc.text,
                        origin=doc.origin,
                        meta=doc.meta,
                    )
                )
                background_count += 1

    final = corpus_mod.Corpus(docs=tuple(docs), domain_tag=args.domain_tag)
    header = make_header(
        "corpus", config_hash=cfg.hash, seed=cfg.seed, domain_tag=args.domain_tag
    )
    corpus_mod.save_corpus(final, args.out, header=header)
    print(
        f"corpus: {len(train_docs)} train, {len(expansion_docs)} expansion, "
        f"{len(term_docs)} term, {background_count} background "
        f"-> {len(final)} docs at {args.out}"
    )
    return EXIT_OK


def _cmd_index(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    loaded = corpus_mod.load_corpus(args.corpus)
    embedder = _embedder(cfg)
    index = index_corpus(
        loaded, embedder, batch_size=cfg.batch_size, workers=cfg.effective_workers()
    )
    extra = (
        {"embedder": "http", "embed_url": cfg.embed_url}
        if cfg.embed_url
        else {"embedder": "hash", "embed_seed": cfg.seed}
    )
    save_index(args.out, index, config_hash=cfg.hash, seed=cfg.seed, **extra)
    print(f"indexed {len(index)} docs (dim {index.dim}) -> {args.out}")
    return EXIT_OK


def _cmd_make_train_data(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    pairs = load_pairs(args.pairs)
    loaded = corpus_mod.load_corpus(args.corpus)
    if args.index:
        index = load_index(args.index)
        header, _ = read_jsonl(args.index)
        embedder = _embedder(cfg, header)
    else:
        embedder = _embedder(cfg)
        index = index_corpus(
            loaded, embedder, batch_size=cfg.batch_size, workers=cfg.effective_workers()
        )
    usable = [p for p in pairs if extract_error_chars(p)]
    samples = build_training_samples(
        usable, loaded, index, embedder, n_neg=cfg.n_neg, seed=cfg.seed
    )
    header = make_header("samples", config_hash=cfg.hash, seed=cfg.seed, n_neg=cfg.n_neg)
    save_samples(samples, args.out, header=header)
    skipped = len(pairs) - len(usable)
    print(f"mined {len(samples)} samples ({skipped} error-free pairs skipped) -> {args.out}")
    return EXIT_OK


def _cmd_correct(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    kind = TaskKind.parse(args.task)
    tasks = load_tasks(args.dataset, kind, has_training_set=not args.no_training_set)

    factory = _chat_factory(cfg, args)
    if factory is None:
        raise ConfigError("no chat backend: pass --mock-script or --backend-url")
    alt_factory = _chat_factory(cfg, args, "mock_script_alt")

    loaded = corpus_mod.load_corpus(args.corpus) if args.corpus else None
    context_source = None
    if args.no_training_set:
        if loaded is not None:
            context_source = corpus_mod.background_map(loaded.docs)
    elif args.mode in ("adaptive", "retrieval") and loaded is not None:
        if args.index:
            index = load_index(args.index)
            header, _ = read_jsonl(args.index)
            embedder = _embedder(cfg, header)
        else:
            embedder = _embedder(cfg)
            index = index_corpus(
                loaded, embedder, batch_size=cfg.batch_size, workers=cfg.effective_workers()
            )
        context_source = Retriever(corpus=loaded, index=index, backend=embedder)

    results = correct_batch(
        tasks,
        factory,
        cfg.pipeline(),
        context_source=context_source,
        mode=args.mode,
        backend_alternative_for=alt_factory,
        workers=cfg.effective_workers(),
        backoff_base=0.0 if args.mock_script else None,
    )
    header = make_header(
        "predictions", config_hash=cfg.hash, seed=cfg.seed, task=kind.value, mode=args.mode
    )
    save_predictions(results, args.out, header=header)
    satisfied = sum(1 for r in results if r.satisfied)
    switched = sum(1 for r in results if r.switched)
    errored = sum(1 for r in results if r.error)
    print(
        f"corrected {len(results)} items: {satisfied} satisfied, "
        f"{switched} switched, {errored} errors -> {args.out}"
    )
    return EXIT_BACKEND if errored else EXIT_OK


def _eval_items(args: argparse.Namespace, kind: TaskKind, nbest_top: int):
    predictions = {rec["id"]: rec for rec in load_predictions(args.predictions)}
    items = []
    rounds = []
    if kind is TaskKind.NBEST:
        rows = [(g.id, g.candidates[:nbest_top], g.target) for g in load_nbest(args.dataset)]
    else:
        rows = [(p.id, p.source, p.target) for p in load_pairs(args.dataset)]
    for item_id, source, target in rows:
        rec = predictions.get(item_id)
        if rec is None:
            raise DataError(f"{args.predictions}: no prediction for item {item_id!r}")
        items.append(
            EvalItem(id=item_id, source=source, hypothesis=rec["output"], reference=target)
        )
        rounds.append(
            (int(rec["rounds_used"]), length_satisfies(kind, source, rec["output"]))
        )
    return items, rounds


class _RoundsView:
    def __init__(self, rounds_used: int, satisfied: bool):
        self.rounds_used = rounds_used
        self.satisfied = satisfied


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    kind = TaskKind.parse(args.task)
    items, rounds = _eval_items(args, kind, cfg.nbest_top)
    if not items:
        raise DataError(f"{args.dataset}: no items to evaluate")

    prf = sentence_prf(items)
    cer_report = cer(items, macro=args.macro_cer)
    length_ok = sum(1 for _, ok in rounds if ok)
    max_rounds = args.max_rounds if args.max_rounds is not None else cfg.mlr_rounds
    buckets = round_histogram([_RoundsView(r, ok) for r, ok in rounds], max_rounds)

    rows = [
        MetricRow("items", str(len(items))),
        MetricRow("precision", format_percent(prf.precision), f"tp={prf.tp} fp={prf.fp}"),
        MetricRow("recall", format_percent(prf.recall), f"tp={prf.tp} fn={prf.fn}"),
        MetricRow("f1", format_percent(prf.f1)),
        MetricRow(
            "cer",
            format_percent(cer_report.cer),
            f"{'macro' if cer_report.macro else 'pooled'} "
            f"edits={cer_report.total_edits} ref_chars={cer_report.total_ref_chars}",
        ),
    ]
    if args.baseline_cer is not None:
        reduction = cerr(args.baseline_cer, cer_report.cer)
        rows.append(
            MetricRow("cerr", format_percent(reduction), f"baseline={args.baseline_cer}")
        )
    rows.append(
        MetricRow(
            "length_ok",
            str(length_ok),
            f"rate={format_percent(length_ok / len(items))}",
        )
    )
    for i, count in enumerate(buckets, start=1):
        rows.append(MetricRow(f"rounds_{i}", str(count), "reflection histogram"))

    percents = (
        ("P", prf.precision),
        ("R", prf.recall),
        ("F1", prf.f1),
        ("CER", cer_report.cer),
        ("len-ok", length_ok / len(items)),
    )
    line = (
        f"items = {len(items)}  P = {format_percent(prf.precision)}  "
        f"R = {format_percent(prf.recall)}  F1 = {format_percent(prf.f1)}  "
        f"CER = {format_percent(cer_report.cer)}"
    )
    summary = EvalSummary(
        rows=tuple(rows),
        percents=percents,
        round_buckets=tuple(buckets),
        summary_line=line,
    )
    if args.out_dir:
        for path in write_report(args.out_dir, summary):
            print(f"wrote {path}")
    print(line)
    return EXIT_OK


_COMMANDS = {
    "build-corpus": _cmd_build_corpus,
    "index": _cmd_index,
    "make-train-data": _cmd_make_train_data,
    "correct": _cmd_correct,
    "evaluate": _cmd_evaluate,
}


def run_command(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except TextmendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
