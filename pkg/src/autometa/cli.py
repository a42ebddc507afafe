"""Command line entry point: ``autometa ingest | run | evaluate | meta-analyze``.

Output directory layout::

    <out>/documents/<pmcid>.md      compacted markdown per article
    <out>/documents/manifest.csv    id, token_count
    <out>/traces.jsonl              one ExtractionTrace per record (append-only)
    <out>/failures.jsonl            records whose model calls failed in the last run
    <out>/evaluation/report.json    metrics for the three tasks
    <out>/evaluation/tables.md      the same as markdown tables
    <out>/meta_analysis/pooled.json pooled estimate, per-study rows, skipped studies
    <out>/meta_analysis/forest.svg  forest plot

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 model transport error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from autometa.corpus import (
    DatasetError,
    ICORecord,
    TrialDocument,
    XMLParseError,
    document_from_xml_file,
    get_tokenizer,
    load_annotations,
    load_documents,
)
from autometa.corpus.text import count_tokens
from autometa.evaluation import evaluate
from autometa.exceptions import (
    ConfigError,
    ContractViolation,
    DomainError,
    EmptyAnalysisError,
    TransportError,
)
from autometa.extraction import ChatClient, ExtractionTrace, ModelConfig, OutcomeExtractor, ReplayClient
from autometa.report import build_forest_model, render_forest_svg, render_tables
from autometa.stats import LOG_ODDS_RATIO, fixed_effect_pool, poolable

logger = logging.getLogger("autometa")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3
TASKS = ("infer_type", "extract", "evaluate", "meta_analyze")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    out: Path
    dataset: Optional[Path] = None
    docs: Optional[Path] = None
    model: Optional[ModelConfig] = None
    mode: str = "replay"
    cache_dir: Optional[Path] = None
    concurrency: int = 4
    split: Optional[str] = None
    type_source: str = "inferred"
    tokenizer: Optional[str] = None
    tasks: tuple[str, ...] = field(default=TASKS)

    def __post_init__(self):
        if self.mode not in ("live", "replay"):
            raise ConfigError(f"mode must be live or replay, not {self.mode!r}")
        if self.mode == "replay" and self.cache_dir is not None and not Path(self.cache_dir).is_dir():
            raise ConfigError(f"replay cache directory {self.cache_dir} does not exist")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        unknown = set(self.tasks) - set(TASKS)
        if unknown:
            raise ConfigError(f"unknown tasks {sorted(unknown)}")
        self.out = Path(self.out)
        self.out.mkdir(parents=True, exist_ok=True)

    @property
    def traces_path(self) -> Path:
        return self.out / "traces.jsonl"


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _load_records(config: RunConfig) -> list[ICORecord]:
    if config.dataset is None:
        raise ConfigError("--dataset is required")
    return load_annotations(config.dataset, config.split)


def _load_docs(config: RunConfig) -> dict[str, TrialDocument]:
    tok = get_tokenizer(config.tokenizer)
    source = config.docs if config.docs is not None else config.out / "documents"
    if not Path(source).is_dir():
        raise ConfigError(f"documents directory {source} does not exist (run ingest or pass --docs)")
    return load_documents(source, tok)


# ---------------------------------------------------------------------------


def cmd_ingest(config: RunConfig) -> int:
    """Compact every ``*.xml`` (and copy every ``*.md``) under ``--docs`` into ``<out>/documents``."""
    if config.docs is None or not config.docs.is_dir():
        raise ConfigError("--docs must name an existing directory")
    tok = get_tokenizer(config.tokenizer)
    out_dir = config.out / "documents"
    out_dir.mkdir(parents=True, exist_ok=True)
    docs: dict[str, TrialDocument] = {}
    for path in sorted(config.docs.glob("*.xml")):
        docs[path.stem] = document_from_xml_file(path, tok)
    for path in sorted(config.docs.glob("*.md")):
        if path.stem not in docs:
            text = path.read_text(encoding="utf-8")
            docs[path.stem] = TrialDocument(path.stem, markdown=text, token_count=count_tokens(text, tok))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "token_count"])
    for doc_id in sorted(docs):
        (out_dir / f"{doc_id}.md").write_text(docs[doc_id].markdown, encoding="utf-8")
        writer.writerow([doc_id, docs[doc_id].token_count])
    (out_dir / "manifest.csv").write_text(buf.getvalue(), encoding="utf-8")
    logger.info("ingested %d documents into %s", len(docs), out_dir)

    if config.dataset is not None:
        wanted = {r.document_id for r in _load_records(config)}
        missing = sorted(wanted - set(docs))
        if missing:
            print(f"missing source files for {len(missing)} articles: {', '.join(missing)}", file=sys.stderr)
            return EXIT_DATA
    return EXIT_OK


def read_traces(path: Path) -> list[ExtractionTrace]:
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [ExtractionTrace.from_json(line) for line in fh if line.strip()]


def make_client(config: RunConfig):
    if config.model is None:
        raise ConfigError("--model is required")
    if config.mode == "replay":
        if config.cache_dir is None:
            raise ConfigError("replay mode needs --cache-dir")
        return ReplayClient(config.cache_dir, config.model.model_name)
    return ChatClient(config.model, cache_dir=config.cache_dir)


def cmd_run(config: RunConfig, client=None) -> int:
    """Extract every record not already in ``traces.jsonl``; append the new traces."""
    records = _load_records(config)
    client = client or make_client(config)
    docs = _load_docs(config)
    missing = sorted({r.document_id for r in records} - set(docs))
    if missing:
        raise DatasetError(f"no documents for {', '.join(missing)}")

    done = {t.record_id for t in read_traces(config.traces_path)}
    todo = [r for r in records if r.record_id not in done]
    logger.info("%d records, %d already done, %d to run", len(records), len(done), len(todo))

    extractor = OutcomeExtractor(
        client=client,
        config=config.model,
        type_source=config.type_source,
        n_jobs=config.concurrency,
        tokenizer=config.tokenizer,
    ).fit()

    def work(record: ICORecord):
        try:
            return extractor.predict_one(record, docs[record.document_id])
        except TransportError as exc:
            exc.record_id = record.record_id
            return exc

    failures = []
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool, open(config.traces_path, "a", encoding="utf-8") as fh:
        # map() yields in input order, so the file is written in dataset order
        for record, result in zip(todo, pool.map(work, todo)):
            if isinstance(result, TransportError):
                failures.append({"record_id": record.record_id, "error": str(result)})
                continue
            fh.write(result.to_json() + "\n")
            fh.flush()

    failures_path = config.out / "failures.jsonl"
    if failures:
        failures_path.write_text("".join(json.dumps(f, sort_keys=True) + "\n" for f in failures), encoding="utf-8")
        print(f"{len(failures)} records failed; see {failures_path}", file=sys.stderr)
        return EXIT_TRANSPORT
    if failures_path.exists():
        failures_path.unlink()
    return EXIT_OK


def cmd_evaluate(config: RunConfig) -> int:
    records = _load_records(config)
    if not config.traces_path.exists():
        raise DatasetError(f"no traces at {config.traces_path}; run `autometa run` first")
    traces = {t.record_id: t for t in read_traces(config.traces_path)}
    dataset_ids = [r.record_id for r in records]
    no_trace = [i for i in dataset_ids if i not in traces]
    unexpected = sorted(set(traces) - set(dataset_ids))
    if no_trace or unexpected:
        raise ContractViolation(f"dataset/trace ids differ: without trace {no_trace}, not in dataset {unexpected}")
    ordered = [traces[i] for i in dataset_ids]
    model_name = config.model.model_name if config.model else next((t.model_name for t in ordered), "")
    report = evaluate(ordered, records, model_name)
    out = config.out / "evaluation"
    _write_json(out / "report.json", report.to_dict())
    (out / "tables.md").write_text(render_tables({model_name or "model": report}), encoding="utf-8")
    logger.info("wrote %s", out)
    return EXIT_OK


@dataclass
class IcoFilter:
    intervention: Optional[str] = None
    comparator: Optional[str] = None
    outcome: Optional[str] = None
    ignore_case: bool = False

    def matches(self, record: ICORecord) -> bool:
        for name in ("intervention", "comparator", "outcome"):
            want = getattr(self, name)
            if want is None:
                continue
            have = getattr(record, name)
            if self.ignore_case:
                want, have = want.casefold(), have.casefold()
            if want != have:
                return False
        return True


def cmd_meta_analyze(config: RunConfig, ico: IcoFilter, use_reference: bool = False) -> int:
    records = [r for r in _load_records(config) if ico.matches(r)]
    if not records:
        raise EmptyAnalysisError("no records match the ICO filter")
    if use_reference:
        findings = [(r, r.reference) for r in records]
    else:
        traces = {t.record_id: t for t in read_traces(config.traces_path)}
        if not traces:
            raise DatasetError(f"no traces at {config.traces_path}; run `autometa run` or pass --use-reference")
        findings = [(r, traces[r.record_id].finding if r.record_id in traces else None) for r in records]

    labels = [r.document_id for r, _ in findings]
    use_ids = len(set(labels)) != len(labels)
    usable = [((r.record_id if use_ids else r.document_id), f) for r, f in findings if f is not None]
    shapes = {type(f).__name__ for _, f in usable}
    if len(shapes) > 1:
        raise ContractViolation(f"matched records mix outcome shapes {sorted(shapes)}")
    estimates, skipped = poolable(usable)
    skipped_ids = [s.study_id for s in skipped] + [
        (r.record_id if use_ids else r.document_id) for r, f in findings if f is None
    ]
    if not estimates:
        raise EmptyAnalysisError("no study has complete data for a point estimate")

    pooled = fixed_effect_pool(estimates)
    title = " vs ".join(x for x in (ico.intervention, ico.comparator) if x)
    if ico.outcome:
        title = f"{title}: {ico.outcome}" if title else ico.outcome
    model = build_forest_model(estimates, pooled, title=title)
    model.skipped = skipped_ids
    out = config.out / "meta_analysis"
    out.mkdir(parents=True, exist_ok=True)
    (out / "forest.svg").write_text(render_forest_svg(model), encoding="utf-8")
    summary = {
        "source": "reference" if use_reference else "model",
        "measure": pooled.measure,
        "pooled": pooled.to_dict(),
        "studies": [e.to_dict() for e in estimates],
        "skipped": skipped_ids,
        "forest": model.to_dict(),
    }
    if pooled.measure == LOG_ODDS_RATIO:
        summary["odds_ratio"] = {
            "point": math.exp(pooled.point),
            "ci_low": math.exp(pooled.ci_low),
            "ci_high": math.exp(pooled.ci_high),
        }
    _write_json(out / "pooled.json", summary)
    print(
        f"{pooled.measure} = {pooled.point:.4f} [{pooled.ci_low:.4f}, {pooled.ci_high:.4f}] over k={pooled.k}"
        + (f" ({len(skipped_ids)} skipped)" if skipped_ids else "")
    )
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--dataset", type=Path, help="annotation CSV/JSONL file, or a directory of <split> files")
    common.add_argument("--split", choices=["dev", "test"], help="dataset split to use")
    common.add_argument("--docs", type=Path, help="directory of <pmcid>.xml / <pmcid>.md files")
    common.add_argument("--tokenizer", default=None, help="'regex' (default) or 'tiktoken[:encoding]'")
    common.add_argument("-v", "--verbose", action="store_true")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", help="model name sent to the endpoint and used in cache keys")
    model.add_argument("--endpoint", default="https://api.openai.com/v1")
    model.add_argument("--api-key-env", default="OPENAI_API_KEY")
    model.add_argument("--max-context-tokens", type=int, default=8192)
    model.add_argument("--max-retries", type=int, default=3)
    model.add_argument("--timeout", type=float, default=120.0)
    model.add_argument("--mode", choices=["live", "replay"], default="live")
    model.add_argument("--cache-dir", type=Path, help="response cache; required in replay mode")
    model.add_argument("--concurrency", type=int, default=4)

    parser = _Parser(prog="autometa", description="Extract trial findings with an LLM and meta-analyze them.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("ingest", parents=[common], help="compact XML reports into markdown")
    run = sub.add_parser("run", parents=[common, model], help="run type inference and extraction")
    run.add_argument(
        "--type-source",
        choices=["inferred", "reference"],
        default="inferred",
        help="outcome type used to pick the extraction prompt",
    )
    sub.add_parser("evaluate", parents=[common, model], help="score traces against the references")
    meta = sub.add_parser("meta-analyze", parents=[common, model], help="pool one ICO across studies")
    meta.add_argument("--intervention")
    meta.add_argument("--comparator")
    meta.add_argument("--outcome")
    meta.add_argument("--ignore-case", action="store_true")
    meta.add_argument("--use-reference", action="store_true", help="pool reference data instead of model output")
    return parser


def _config_from_args(args) -> RunConfig:
    model = None
    if getattr(args, "model", None):
        model = ModelConfig(
            model_name=args.model,
            endpoint=args.endpoint,
            api_key_env=args.api_key_env,
            max_context_tokens=args.max_context_tokens,
            max_retries=args.max_retries,
            request_timeout=args.timeout,
            max_in_flight=max(1, args.concurrency),
        )
    return RunConfig(
        out=args.out,
        dataset=args.dataset,
        docs=args.docs,
        model=model,
        mode=getattr(args, "mode", "replay"),
        cache_dir=getattr(args, "cache_dir", None),
        concurrency=getattr(args, "concurrency", 4),
        split=args.split,
        type_source=getattr(args, "type_source", "inferred"),
        tokenizer=args.tokenizer,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _config_from_args(args)
        if args.command == "ingest":
            return cmd_ingest(config)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        if args.command == "meta-analyze":
            ico = IcoFilter(args.intervention, args.comparator, args.outcome, args.ignore_case)
            if ico.intervention is None and ico.comparator is None and ico.outcome is None:
                raise ConfigError("give at least one of --intervention, --comparator, --outcome")
            return cmd_meta_analyze(config, ico, args.use_reference)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (DatasetError, XMLParseError, ContractViolation, DomainError, EmptyAnalysisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
