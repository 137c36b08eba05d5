"""Command-line entry point: ``re-forge <subcommand> [flags]``.

Exit codes: 0 success, 1 validation error, 2 I/O or usage error.  Every
subcommand accepts ``--config file.json`` whose keys are that subcommand's
flag names (dashes or underscores); explicit flags win over the file and
unknown keys are rejected.  ``RE_FORGE_THREADS`` caps parallelism (0 or
unset means one thread per CPU).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import brat, gcn, graph, merge, metrics, prep
from .errors import ConfigError, ReForgeError
from .model import CprGroup, FineRelation, label_text

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

# flags that never come from a config file
_RESERVED = {"command", "config", "func"}


def thread_count() -> int:
    raw = os.environ.get("RE_FORGE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RE_FORGE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("RE_FORGE_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _write(path, content: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(content)
        return
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(content)


def _read(path) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise _UsageError(f"{args.command}: missing required {flags}")


class _UsageError(Exception):
    pass


def _out_format(args, out, source):
    """Explicit --output-format, else JSON for a .json path, else the source format."""
    if args.output_format:
        return args.output_format
    if str(out).endswith(".json"):
        return "json"
    return brat.detect_format(source)


def _read_corpus(args, path, provenance=()):
    return brat.read_corpus(path, args.input_format, args.split, frozenset(provenance))


# -- subcommands -------------------------------------------------------------

def cmd_convert(args):
    _require(args, "input", "to", "out")
    corpus = _read_corpus(args, args.input)
    brat.write_corpus(corpus, args.out, args.to)
    return EXIT_OK


def cmd_merge(args):
    _require(args, "a", "b", "out")
    a = _read_corpus(args, args.a, [args.a_tag] if args.a_tag else [])
    b = _read_corpus(args, args.b, [args.b_tag] if args.b_tag else [])
    if args.policy == merge.RESOLUTION_FILE:
        _require(args, "resolutions")
        policy = merge.ConflictPolicy.from_resolution_file(_read(args.resolutions))
    else:
        policy = merge.ConflictPolicy(args.policy)
    try:
        merged, report = merge.merge_corpora(a, b, policy, strict=not args.lenient)
    except ReForgeError as exc:
        conflicts = getattr(exc, "conflicts", None)
        if conflicts and args.report_dir:
            partial = merge.MergeReport(conflicts=list(conflicts))
            _write(Path(args.report_dir) / "conflicts.tsv", partial.conflicts_tsv())
        raise
    brat.write_corpus(merged, args.out, _out_format(args, args.out, args.a))
    report_dir = Path(args.report_dir) if args.report_dir else Path(args.out).parent
    _write(report_dir / "report.json", report.to_json())
    _write(report_dir / "conflicts.tsv", report.conflicts_tsv())
    return EXIT_OK


def cmd_stats(args):
    _require(args, "input")
    corpus = _read_corpus(args, args.input)
    _write(args.out, json.dumps(merge.corpus_stats(corpus), indent=2) + "\n")
    return EXIT_OK


def cmd_map_cpr(args):
    if args.input:
        corpus = _read_corpus(args, args.input)
        _require(args, "out")
        docs = []
        for doc in corpus:
            rels = [type(r)(r.id, prep.to_cpr(r.label), r.arg1, r.arg2, r.provenance) for r in doc.relations]
            seen = set()
            kept = []
            for r in rels:
                key = (r.arg1, r.arg2, r.label)
                if key not in seen:
                    seen.add(key)
                    kept.append(r)
            docs.append(type(doc)(doc.doc_id, doc.title, doc.abstract, doc.entities, kept,
                                  doc.other_lines, doc.provenance))
        mapped = type(corpus).from_documents(corpus.split, docs)
        brat.write_corpus(mapped, args.out, _out_format(args, args.out, args.input))
        return EXIT_OK
    labels = args.labels or [f.value for f in FineRelation]
    lines = []
    for text in labels:
        fine = FineRelation.parse(text)
        lines.append(f"{label_text(fine)}\t{prep.map_to_cpr(fine).label}\n")
    _write(args.out, "".join(lines))
    return EXIT_OK


def _strategy(args):
    return prep.MaskStrategy(prep.MaskMode(args.mask), args.chem_token, args.gene_token)


def _excluded(args):
    return frozenset(CprGroup.parse(x) for x in args.exclude)


def cmd_instances(args):
    _require(args, "input", "out")
    corpus = _read_corpus(args, args.input)
    cfg = prep.PrepConfig(seed=0, excluded_groups=_excluded(args), masking=_strategy(args))
    instances, report = prep.generate_instances(corpus, cfg, threads=thread_count())
    if args.json:
        _write(args.out, prep.instances_to_json(corpus, instances) + "\n")
    else:
        _write(args.out, prep.instances_to_tsv(instances))
    if args.report:
        _write(args.report, report.to_json())
    return EXIT_OK


def cmd_downsample(args):
    _require(args, "input", "seed", "out")
    rows = prep.parse_instances_tsv(_read(args.input))
    _write(args.out, prep.instances_to_tsv(prep.downsample_negatives(rows, args.ratio, args.seed)))
    return EXIT_OK


def cmd_split(args):
    _require(args, "input", "seed", "train_out", "validation_out")
    rows = prep.parse_instances_tsv(_read(args.input))
    train, validation = prep.stratified_split(rows, args.ratio, args.seed)
    _write(args.train_out, prep.instances_to_tsv(train))
    _write(args.validation_out, prep.instances_to_tsv(validation))
    return EXIT_OK


def cmd_weights(args):
    _require(args, "input")
    rows = prep.parse_instances_tsv(_read(args.input))
    weights = prep.class_weights(rows)
    _write(args.out, json.dumps({k.label: v for k, v in weights.items()}, indent=2) + "\n")
    return EXIT_OK


def cmd_mask(args):
    """Every same-sentence chemical-gene pair with its masked sentence, unlabeled."""
    _require(args, "input")
    corpus = _read_corpus(args, args.input)
    cfg = prep.PrepConfig(seed=0, excluded_groups=frozenset(), masking=_strategy(args))
    instances, _ = prep.generate_instances(corpus, cfg, threads=thread_count())
    lines = []
    seen = set()
    for inst in instances:
        key = (inst.doc_id, inst.chem.id, inst.gene.id)
        if key in seen:
            continue
        seen.add(key)
        text = inst.masked_text.replace("\t", " ").replace("\n", " ")
        lines.append(f"{inst.doc_id}\t{inst.sentence_index}\t{inst.chem.id}\t{inst.gene.id}\t{text}\n")
    _write(args.out, "".join(lines))
    return EXIT_OK


def _graph_texts(args):
    path = Path(args.input)
    if path.is_dir() or path.suffix == ".json":
        return [doc.text for doc in _read_corpus(args, path)]
    return [line for line in _read(path).splitlines() if line.strip()]


def cmd_graph(args):
    _require(args, "input", "out")
    stop = graph.load_word_list(args.stopwords) if args.stopwords else []
    tokenizer = graph.WordPieceTokenizer.from_file(args.vocab) if args.vocab else None
    extra = []
    if args.extra:
        saved = args.input
        args.input = args.extra
        extra = _graph_texts(args)
        args.input = saved
    g = graph.build_vocab_graph(_graph_texts(args), stopwords=stop, tokenizer=tokenizer,
                                window_size=args.window, policy=args.policy, extra_texts=extra,
                                threads=thread_count())
    _write(args.out, graph.graph_to_text(g))
    if args.vocab_out:
        _write(args.vocab_out, g.vocab.to_text())
    return EXIT_OK


def cmd_gcn_demo(args):
    _require(args, "graph", "seed")
    g = graph.graph_from_text(_read(args.graph))
    if g.num_nodes > gcn.DENSE_NODE_CAP:
        raise ReForgeError(f"graph has {g.num_nodes} nodes; the demo is capped at {gcn.DENSE_NODE_CAP}")
    rng = np.random.default_rng(args.seed)
    v = g.num_nodes
    a_norm = g.normalized()
    params = gcn.VgcnParams.random(v, args.hidden, args.classes, rng)
    x = rng.poisson(1.0, (args.batch, v)).astype(float)
    out = gcn.vgcn_forward(x, a_norm, params)
    upstream = rng.normal(size=out.shape)
    err = gcn.check_gradients(x, a_norm, params, upstream, entries=args.check_entries, rng=rng)
    body = {
        "nodes": v,
        "edges": len(g.edges),
        "hidden": args.hidden,
        "classes": args.classes,
        "batch": args.batch,
        "max_relative_gradient_error": err,
        "output": out.tolist(),
    }
    _write(args.out, json.dumps(body, indent=2) + "\n")
    if args.embeddings_out:
        ids = [f"row{i}" for i in range(args.batch)]
        _write(args.embeddings_out, gcn.embeddings_to_tsv(ids, out))
    return EXIT_OK


def cmd_eval(args):
    reports = []
    if args.predictions:
        for path in args.predictions:
            _, gold, pred = metrics.read_predictions_tsv(_read(path))
            reports.append(metrics.evaluate(gold, pred))
    else:
        _require(args, "gold", "pred")
        gold = metrics.read_labels_tsv(_read(args.gold))
        for path in args.pred:
            pred = metrics.read_labels_tsv(_read(path))
            if set(pred) != set(gold):
                raise ReForgeError(f"{path}: instance ids differ from the gold file")
            ids = list(gold)
            reports.append(metrics.evaluate([gold[i] for i in ids], [pred[i] for i in ids]))
    report = reports[0] if len(reports) == 1 else metrics.aggregate_runs(reports)
    _write(args.out, report.to_table() if args.table else report.to_json())
    return EXIT_OK


def cmd_schedule(args):
    p = metrics.ScheduleParams(args.lr_factor, args.warm_up)
    steps = args.steps if args.steps else range(1, args.max_step + 1, args.every)
    _write(args.out, "".join(f"{s}\t{metrics.lr_schedule(s, p):.17g}\n" for s in steps))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _corpus_flags(p):
    p.add_argument("--input-format", choices=brat.FORMATS, default=None,
                   help="input corpus format (default: detect from path)")
    p.add_argument("--split", choices=("train", "validation"), default="train", help="corpus split")


def _mask_flags(p):
    p.add_argument("--mask", choices=[m.value for m in prep.MaskMode], default="mask-targets",
                   help="entity masking strategy")
    p.add_argument("--chem-token", default="@CHEMICAL$", help="chemical mask token")
    p.add_argument("--gene-token", default="@GENE$", help="gene mask token")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="re-forge", formatter_class=fmt,
                                     description="Chemical-gene relation corpus and graph toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.add_argument("--config", default=None, help="JSON file of flag values")
        p.set_defaults(func=func)
        return p

    p = add("convert", cmd_convert, "convert a corpus between BRAT, TSV and JSON")
    p.add_argument("--input", help="corpus directory or JSON file")
    p.add_argument("--to", choices=brat.FORMATS, help="output format")
    p.add_argument("--out", help="output directory or JSON file")
    _corpus_flags(p)

    p = add("merge", cmd_merge, "merge two corpora into one with a conflict report")
    p.add_argument("--a", help="first corpus")
    p.add_argument("--b", help="second corpus")
    p.add_argument("--a-tag", default="ChemProt", help="provenance tag for the first corpus")
    p.add_argument("--b-tag", default="DrugProt", help="provenance tag for the second corpus")
    p.add_argument("--policy", choices=merge.POLICY_KINDS, default=merge.FAIL, help="conflict policy")
    p.add_argument("--resolutions", help="resolution TSV for the resolution-file policy")
    p.add_argument("--lenient", action="store_true", help="record text mismatches instead of failing")
    p.add_argument("--out", help="merged corpus output path")
    p.add_argument("--output-format", choices=brat.FORMATS, default=None,
                   help="merged corpus format (default: format of --a)")
    p.add_argument("--report-dir", default=None,
                   help="where report.json and conflicts.tsv go (default: parent of --out)")
    _corpus_flags(p)

    p = add("stats", cmd_stats, "abstract, entity, relation and per-CPR counts as JSON")
    p.add_argument("input", nargs="?", help="corpus path")
    p.add_argument("--out", default="-", help="output file")
    _corpus_flags(p)

    p = add("map-cpr", cmd_map_cpr, "map fine-grained relation labels to CPR groups")
    p.add_argument("labels", nargs="*", help="labels to map (default: all)")
    p.add_argument("--input", default=None, help="relabel a whole corpus instead")
    p.add_argument("--out", default="-", help="output file or corpus path")
    p.add_argument("--output-format", choices=brat.FORMATS, default=None,
                   help="relabelled corpus format (default: input format)")
    _corpus_flags(p)

    p = add("instances", cmd_instances, "sentence-level relation instances with synthetic negatives")
    p.add_argument("--input", help="corpus path")
    p.add_argument("--out", help="instances file")
    p.add_argument("--json", action="store_true", help="write the corpus JSON with an instances array")
    p.add_argument("--report", default=None, help="cross-sentence report JSON path")
    p.add_argument("--exclude", nargs="*", default=["CPR:7", "CPR:8"], help="CPR groups to drop")
    _mask_flags(p)
    _corpus_flags(p)

    p = add("downsample", cmd_downsample, "seeded downsampling of CPR:10 instances")
    p.add_argument("--input", help="instances TSV")
    p.add_argument("--out", default="-", help="output TSV")
    p.add_argument("--ratio", type=float, default=0.6, help="fraction of negatives kept")
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")

    p = add("split", cmd_split, "seeded stratified train/validation split")
    p.add_argument("--input", help="instances TSV")
    p.add_argument("--train-out", help="training TSV")
    p.add_argument("--validation-out", help="validation TSV")
    p.add_argument("--ratio", type=float, default=0.8, help="training fraction per class")
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")

    p = add("weights", cmd_weights, "inverse-frequency class weights as JSON")
    p.add_argument("--input", help="instances TSV")
    p.add_argument("--out", default="-", help="output file")

    p = add("mask", cmd_mask, "masked sentence text for every same-sentence chemical-gene pair")
    p.add_argument("--input", help="corpus path")
    p.add_argument("--out", default="-", help="output TSV")
    _mask_flags(p)
    _corpus_flags(p)

    p = add("graph", cmd_graph, "build and serialize the NPMI vocabulary graph")
    p.add_argument("--input", help="corpus path, or a text file with one document per line")
    p.add_argument("--extra", default=None, help="texts that add nodes without adding counts")
    p.add_argument("--stopwords", default=None, help="stopword list, one per line")
    p.add_argument("--vocab", default=None, help="WordPiece vocabulary file (default: whole words)")
    p.add_argument("--window", type=int, default=graph.DEFAULT_WINDOW, help="sliding window size")
    p.add_argument("--policy", choices=(graph.KEEP_INTRAWORD, graph.SPLIT_ALL), default=graph.KEEP_INTRAWORD,
                   help="punctuation policy")
    p.add_argument("--out", help="graph text file")
    p.add_argument("--vocab-out", default=None, help="also write the node vocabulary")
    _corpus_flags(p)

    p = add("gcn-demo", cmd_gcn_demo, "VGCN forward pass and gradient check on a saved graph")
    p.add_argument("--graph", help="graph text file")
    p.add_argument("--hidden", type=int, default=8, help="hidden width")
    p.add_argument("--classes", type=int, default=4, help="output width")
    p.add_argument("--batch", type=int, default=2, help="number of random feature rows")
    p.add_argument("--check-entries", type=int, default=64, help="parameters checked per matrix")
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")
    p.add_argument("--out", default="-", help="JSON output")
    p.add_argument("--embeddings-out", default=None, help="per-row embedding TSV")

    p = add("eval", cmd_eval, "score predictions against gold labels")
    p.add_argument("--gold", default=None, help="TSV of instance_id, label")
    p.add_argument("--pred", nargs="*", default=None, help="TSV(s) of instance_id, label; several files are averaged")
    p.add_argument("--predictions", nargs="*", default=None,
                   help="TSV(s) of instance_id, gold, pred, instead of --gold/--pred")
    p.add_argument("--table", action="store_true", help="text table instead of JSON")
    p.add_argument("--out", default="-", help="output file")

    p = add("schedule", cmd_schedule, "print the warm-up learning-rate curve")
    p.add_argument("--lr-factor", type=float, default=metrics.LR_FACTOR, help="scale factor")
    p.add_argument("--warm-up", type=int, default=metrics.WARM_UP, help="warm-up steps")
    p.add_argument("--max-step", type=int, default=4000, help="last step")
    p.add_argument("--every", type=int, default=100, help="step stride")
    p.add_argument("--steps", type=int, nargs="*", default=None, help="explicit steps instead of a range")
    p.add_argument("--out", default="-", help="output file")
    return parser


def _apply_config(parser, args, argv):
    """Re-parse with config values as defaults so explicit flags still win."""
    try:
        data = json.loads(_read(args.config))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{args.config}: top level must be an object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions} - _RESERVED - {"help"}
    values = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"{args.config}: unknown key {key!r} for {args.command}")
        values[dest] = value
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, args, argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"re-forge: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # ReForgeError derives from ValueError
        print(f"re-forge: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"re-forge: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
