"""Command-line entry point: ``tdreview <command> [options]``.

Exit codes: 0 success, 1 fatal error, 2 partial success (crawl skipped pages).
Failures print one line to stderr: ``tdreview: error code=<Name> message=<json string>``.
An INI file given with ``--config`` supplies defaults (section ``[tdreview]``
or ``[<command>]``); flags on the command line override it.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from collections import Counter
from importlib import resources
from pathlib import Path

from . import analytics
from .corpus import (
    TD_TYPES,
    RawComment,
    SynonymLexicon,
    augment,
    default_targets,
    derive_benchmark,
    load_corpus,
    load_dataset,
    load_phrases,
    persist_corpus,
    save_dataset,
)
from .crawl import TOKEN_ENV, IssueCrawler
from .errors import TdReviewError
from .evaluation import evaluate_pipeline, format_table, split_80_20
from .hierarchy import distance_matrix, induce_hierarchy, normalize_confusion
from .learn import ClassifierSpec, cv_confusion
from .pipeline import TdInstance, classify_comments, load_model, save_model, train_pipeline
from .report import build_report, render_report
from .synthetic import keyword_corpus
from .textfeat import BowVectorizer

log = logging.getLogger("tdreview")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


def _write(path: str | None, text: str) -> None:
    fh = _open_out(path)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _load_spec(value: str | None) -> ClassifierSpec:
    if not value:
        return ClassifierSpec()
    text = Path(value).read_text(encoding="utf-8") if os.path.exists(value) else value
    return ClassifierSpec.from_dict(json.loads(text))


def _load_instances(path: str) -> list[TdInstance]:
    fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    try:
        return [TdInstance.from_dict(json.loads(line)) for line in fh if line.strip()]
    finally:
        if fh is not sys.stdin:
            fh.close()


# ---------------------------------------------------------------------------
# commands


def cmd_crawl(args) -> int:
    crawler = IssueCrawler(
        repo=args.repo,
        platform=args.platform,
        approved_label=args.label,
        token=os.environ.get(args.token_env),
        api_url=args.api_url,
        title_pattern=args.package_title_regex,
        per_page=args.per_page,
        concurrency=args.concurrency,
    )
    n = persist_corpus(crawler.crawl(), args.out, append=args.append)
    s = crawler.stats
    print(f"issues={s.issues} comments={n} requests={s.requests} skipped_pages={s.skipped_pages} rate_limit_waits={s.rate_limit_waits}")
    return EXIT_PARTIAL if s.skipped_pages else EXIT_OK


def cmd_prepare(args) -> int:
    result = derive_benchmark(load_phrases(args.labels), load_corpus(args.corpus))
    save_dataset(result.sentences, args.out)
    counts = result.counts()
    print(json.dumps({
        "sentences": len(result.sentences),
        "td": sum(v for k, v in counts.items() if k != "non_td"),
        "non_td": counts.get("non_td", 0),
        "unresolved_comments": len(result.unresolved),
        "unmatched_phrases": len(result.unmatched_phrases),
        "conflicting_sentences": len(result.conflicts),
    }))
    return EXIT_OK


def cmd_augment(args) -> int:
    data = load_dataset(args.input)
    if args.lexicon:
        lexicon = SynonymLexicon.load(args.lexicon)
    else:
        with resources.as_file(resources.files("tdreview.presets").joinpath("lexicon.jsonl")) as p:
            lexicon = SynonymLexicon.load(p)
    if args.targets in (None, "auto"):
        targets = default_targets(data)
    else:
        text = Path(args.targets).read_text(encoding="utf-8") if os.path.exists(args.targets) else args.targets
        targets = json.loads(text)
    augmented = augment(data, lexicon, targets, args.seed)
    save_dataset(augmented, args.out)
    print(json.dumps(dict(sorted(Counter(s.label for s in augmented).items()))))
    return EXIT_OK


def cmd_split(args) -> int:
    train, test = split_80_20(load_dataset(args.input), args.seed)
    save_dataset(train, args.train_out)
    save_dataset(test, args.test_out)
    print(f"train={len(train)} test={len(test)}")
    return EXIT_OK


def cmd_train(args) -> int:
    data = load_dataset(args.dataset)
    model = train_pipeline(data, _load_spec(args.spec), args.hierarchy, args.seed, args.k_max, args.folds)
    save_model(model, args.model_out)
    counts = Counter(s.label for s in data)
    print(f"vocabulary: {len(model.vocabulary)} tokens, scheme={model.vectorizer.scheme}")
    print(f"stage-1 gate: td={sum(v for k, v in counts.items() if k != 'non_td')} non_td={counts.get('non_td', 0)}")
    for name, types in model.hierarchy.clusters.items():
        n = sum(counts.get(t, 0) for t in types)
        leaf = "leaf model" if name in model.leaf_models else "single type, no leaf model"
        print(f"stage-2 {name}: {', '.join(types)} ({n} sentences, {leaf})")
    report = evaluate_pipeline(model, data)
    print(f"training-set macro-F1: stage1={report.stage1.macro_f1:.3f} end_to_end={report.end_to_end_11class.macro_f1:.3f}")
    return EXIT_OK


def cmd_induce(args) -> int:
    data = [s for s in load_dataset(args.dataset) if s.label != "non_td"]
    spec = _load_spec(args.spec)
    labels = [t for t in TD_TYPES if t in {s.label for s in data}]
    vec = BowVectorizer(spec.feature_scheme).fit([s.text for s in data])
    examples = list(zip(vec.vectors([s.text for s in data]), [s.label for s in data]))
    M = cv_confusion(examples, spec, labels, args.folds, args.seed)
    h = induce_hierarchy(M, args.k_max, args.seed)
    M_bar = normalize_confusion(M)
    doc = h.to_dict()
    doc["confusion"] = M.to_dict()
    doc["normalized"] = M_bar.tolist()
    doc["distance"] = distance_matrix(M_bar, labels).values.tolist()
    doc["k"] = h.meta.get("k")
    _write(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluate_pipeline(load_model(args.model), load_dataset(args.test))
    if args.out:
        _write(args.out, json.dumps(report.to_dict(), indent=2) + "\n")
    table = format_table(report)
    if args.table_out:
        _write(args.table_out, table)
    sys.stdout.write(table)
    print(f"macro_f1 stage1={report.stage1.macro_f1:.4f} end_to_end={report.end_to_end_11class.macro_f1:.4f}")
    return EXIT_OK


def _read_comments(path: str) -> list[RawComment]:
    if path != "-":
        return load_corpus(path)
    return [RawComment.from_dict(json.loads(line)) for line in sys.stdin if line.strip()]


def cmd_classify(args) -> int:
    model = load_model(args.model)
    instances = classify_comments(model, _read_comments(args.input), workers=args.workers)
    _write(args.out, "".join(json.dumps(i.to_dict(), ensure_ascii=False) + "\n" for i in instances))
    return EXIT_OK


def _packages_by_year(args, instances) -> dict[int, int]:
    if args.packages_by_year:
        raw = json.loads(Path(args.packages_by_year).read_text(encoding="utf-8"))
        return {int(k): int(v) for k, v in raw.items()}
    source = load_corpus(args.corpus) if args.corpus else instances
    return analytics.packages_by_year(source, cumulative=not args.per_year)


def cmd_analyze(args) -> int:
    instances = _load_instances(args.instances)
    kind = args.analysis
    if kind == "distribution":
        result = analytics.distribution(instances)
        text = result.to_csv() if args.format == "csv" else json.dumps(result.to_dict(), indent=2) + "\n"
    elif kind == "correlation":
        result = analytics.correlation_matrix(analytics.counts_per_package(instances))
        text = result.to_csv() if args.format == "csv" else json.dumps(result.to_dict(), indent=2) + "\n"
    else:
        series = analytics.trend(instances, _packages_by_year(args, instances))
        if kind == "trend":
            text = series.to_csv() if args.format == "csv" else json.dumps(series.to_dict(), indent=2) + "\n"
        else:
            years = [y for y, _ in next(iter(series.series.values()))]
            first = args.first_year if args.first_year is not None else years[0]
            last = args.last_year if args.last_year is not None else years[-1]
            g = analytics.growth(series, first, last)
            if kind == "growth":
                text = g.to_csv() if args.format == "csv" else json.dumps(g.to_dict(), indent=2) + "\n"
            else:
                corr = analytics.correlation_matrix(analytics.counts_per_package(instances))
                totals = Counter(i.td_type for i in instances)
                points = analytics.impact(g, corr, totals)
                text = analytics.impact_to_csv(points) if args.format == "csv" else json.dumps(analytics.impact_to_dict(points), indent=2) + "\n"
    _write(args.out, text)
    return EXIT_OK


def cmd_report(args) -> int:
    report = build_report(load_model(args.model), load_corpus(args.corpus), args.package)
    data = render_report(report, args.format)
    if args.out in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(args.out).write_bytes(data)
    return EXIT_OK


def cmd_synth(args) -> int:
    n = save_dataset(keyword_corpus(args.per_label, args.seed), args.out)
    print(f"sentences={n}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    p = argparse.ArgumentParser(prog="tdreview", description="Technical-debt detection in peer-review comments.")
    p.add_argument("--config", help="INI file with default option values")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        subs[name] = sp
        return sp

    sp = add("crawl", cmd_crawl, "fetch labeled review issues and their comments")
    sp.add_argument("--platform", required=True)
    sp.add_argument("--repo", required=True, help="owner/name")
    sp.add_argument("--label", required=True, help="label marking approved submissions")
    sp.add_argument("--out", required=True)
    sp.add_argument("--package-title-regex", default=None, help="regex with a named group 'package'")
    sp.add_argument("--api-url", default="https://api.github.com")
    sp.add_argument("--token-env", default=TOKEN_ENV)
    sp.add_argument("--per-page", type=int, default=100)
    sp.add_argument("--concurrency", type=int, default=4)
    sp.add_argument("--append", action="store_true")

    sp = add("prepare", cmd_prepare, "derive the sentence-level benchmark from labeled phrases")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--labels", required=True, help="JSONL or CSV of comment_id, phrase, type")
    sp.add_argument("--out", required=True)

    sp = add("augment", cmd_augment, "top up minority TD types with synonym substitution")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--lexicon", default=None, help="defaults to the bundled lexicon")
    sp.add_argument("--targets", default="auto", help="JSON object type->count, a JSON file, or 'auto'")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("split", cmd_split, "stratified 80:20 train/test split")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--train-out", required=True)
    sp.add_argument("--test-out", required=True)

    sp = add("train", cmd_train, "train the two-stage pipeline")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--spec", default=None, help="classifier spec as JSON text or file")
    sp.add_argument("--hierarchy", default="induce", help="induce | reference | preset:<file>")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--k-max", type=int, default=None)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--model-out", required=True)

    sp = add("induce", cmd_induce, "induce a type hierarchy from cross-validated confusion")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--spec", default=None)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--k-max", type=int, default=None)
    sp.add_argument("--out", default="-")

    sp = add("eval", cmd_eval, "evaluate a model on a labeled test set")
    sp.add_argument("--model", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--out", default=None, help="JSON report path")
    sp.add_argument("--table-out", default=None)

    sp = add("classify", cmd_classify, "classify corpus comments into TD instances")
    sp.add_argument("--model", required=True)
    sp.add_argument("--in", dest="input", required=True, help="corpus JSONL or '-'")
    sp.add_argument("--out", default="-")
    sp.add_argument("--workers", type=int, default=1)

    sp = add("analyze", cmd_analyze, "corpus-level analyses over TD instances")
    sp.add_argument("analysis", choices=["distribution", "correlation", "trend", "growth", "impact"])
    sp.add_argument("--instances", required=True)
    sp.add_argument("--packages-by-year", default=None, help="JSON object year->package count")
    sp.add_argument("--corpus", default=None, help="derive package counts from this corpus")
    sp.add_argument("--per-year", action="store_true", help="count packages per year instead of cumulatively")
    sp.add_argument("--first-year", type=int, default=None)
    sp.add_argument("--last-year", type=int, default=None)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--out", default="-")

    sp = add("report", cmd_report, "per-package TD report")
    sp.add_argument("--model", required=True)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--package", required=True)
    sp.add_argument("--format", choices=["json", "html"], default="json")
    sp.add_argument("--out", default="-")

    sp = add("synth", cmd_synth, "write a keyword-planted synthetic dataset")
    sp.add_argument("--per-label", type=int, default=200)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--out", required=True)
    return p, subs


def _apply_config(path: str, command: str, subparser: argparse.ArgumentParser) -> None:
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise FileNotFoundError(path)
    values = {}
    for section in ("tdreview", command):
        if cp.has_section(section):
            values.update({k.replace("-", "_"): v for k, v in cp.items(section)})
    defaults = {}
    for action in subparser._actions:
        if action.dest in values:
            raw = values[action.dest]
            if action.type is not None:
                defaults[action.dest] = action.type(raw)
            elif isinstance(action.const, bool):
                defaults[action.dest] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                defaults[action.dest] = raw
            action.required = False
    subparser.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    try:
        if known.config:
            command = next((a for a in rest if a in subs), None)
            if command:
                _apply_config(known.config, command, subs[command])
        args = parser.parse_args(argv)
    except FileNotFoundError as exc:
        print(f"tdreview: error code=FileNotFound message={json.dumps(str(exc))}", file=sys.stderr)
        return EXIT_FATAL
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TdReviewError as exc:
        code, msg = exc.code, str(exc)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit code 1
        code, msg = type(exc).__name__, str(exc)
    print(f"tdreview: error code={code} message={json.dumps(msg)}", file=sys.stderr)
    return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
