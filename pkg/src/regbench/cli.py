"""Batch command-line entry point.

Exit codes: 0 success, 1 input error (including usage errors), 2 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, atlm, harness, ingest, plots, stats
from .datamodel import MISSING_POLICIES, load_csv
from .errors import InputError, NumericalError, RegbenchError
from .learners import LEARNERS, LearnerConfig



class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _artifact(args, payload: dict, inputs) -> dict:
    """Wrap a payload with tool version, resolved config and input content hashes."""
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "threads")}
    for k, v in config.items():
        if isinstance(v, Path):
            config[k] = str(v)
        elif isinstance(v, list):
            config[k] = [str(x) if isinstance(x, Path) else x for x in v]
    out = dict(payload)
    out["tool"] = {"name": "regbench", "version": __version__}
    out["run_config"] = config
    out["inputs"] = {str(p): file_sha256(p) for p in inputs}
    return out


def _require_files(*paths):
    for p in paths:
        if not Path(p).is_file():
            raise InputError(f"no such file: {p}")


def _require_parent(*paths):
    for p in paths:
        parent = Path(p).resolve().parent
        if not parent.is_dir():
            raise InputError(f"output directory does not exist: {parent}")


def _write(path, text: str):
    Path(path).write_text(text, encoding="utf-8")


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"--seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise InputError("--seeds is empty")
    return seeds


def _load_table(args):
    return load_csv(args.input, args.missing, args.exclude or ())


# ---------------------------------------------------------------- subcommands


def cmd_extract(args):
    _require_files(args.posts)
    _require_parent(args.features)
    posts = ingest.load_posts(args.posts)
    snippets = ingest.extract_snippets(posts)
    ingest.write_snippet_files(snippets, args.out_dir)
    _write(args.features, ingest.features_csv_text(snippets))
    print(f"{len(posts)} posts -> {len(snippets)} multiline snippets")


def cmd_join(args):
    _require_files(args.features, args.violations, args.posts)
    _require_parent(args.out)
    posts = ingest.load_posts(args.posts)
    feats = ingest.read_features(Path(args.features).read_text(encoding="utf-8-sig"), str(args.features))
    viols = ingest.read_violations(Path(args.violations).read_text(encoding="utf-8-sig"), str(args.violations))
    table = ingest.build_modeling_table(posts, feats, viols)
    table.write_csv(args.out)
    print(f"{table.n_rows} rows x {len(table.column_names)} columns")


def cmd_transform(args):
    _require_files(args.input)
    _require_parent(args.out, args.recipe)
    table = _load_table(args)
    table.column(args.response)
    recipe = atlm.fit_recipe(table, args.threshold)
    recipe.apply(table).write_csv(args.out)
    payload = {"response": args.response, "recipe": recipe.to_list()}
    _write(args.recipe, dump_json(_artifact(args, payload, [args.input])))


def cmd_correlate(args):
    _require_files(args.input)
    _require_parent(args.out)
    table = _load_table(args)
    payload = {"kendall": stats.correlation_matrix(table, args.columns)}
    _write(args.out, dump_json(_artifact(args, payload, [args.input])))


def cmd_baseline(args):
    _require_files(args.input, *([args.recipe] if args.recipe else []))
    _require_parent(args.out)
    table = _load_table(args)
    predictors = args.predictors or atlm.default_predictors(table, args.response)
    if args.recipe:
        # input is already transformed by this recipe
        recipe = atlm.TransformRecipe.from_list(json.loads(Path(args.recipe).read_text(encoding="utf-8"))["recipe"])
        ols = stats.ols_fit(table.select(predictors), table.column(args.response))
        report = atlm.BaselineReport(recipe, ols, args.response)
        inputs = [args.input, args.recipe]
    else:
        report = atlm.build_baseline(table, args.response, args.threshold, predictors)
        inputs = [args.input]
    _write(args.out, dump_json(_artifact(args, report.to_dict(), inputs)))


def cmd_tune(args):
    _require_files(args.input)
    _require_parent(args.out)
    table = _load_table(args)
    grid = harness.default_grid(args.learner, args.max_trees, args.model_seed)
    result = harness.tune(table, args.response, args.learner, grid, args.seed, args.folds,
                          args.features, harness.resolve_threads(args.threads))
    payload = {"config": result.best.to_dict(), "tuning": result.to_dict(),
               "dataset_fingerprint": table.fingerprint()}
    _write(args.out, dump_json(_artifact(args, payload, [args.input])))


def _read_config(path) -> tuple[LearnerConfig, int | None]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    body = doc.get("config", doc)
    tuning_seed = doc.get("tuning", {}).get("shared_tuning_seed")
    return LearnerConfig.from_dict(body), tuning_seed


def cmd_evaluate(args):
    _require_files(args.input, *args.configs)
    _require_parent(args.out)
    seeds = _seeds(args.seeds)
    table = _load_table(args)
    loaded = [_read_config(p) for p in args.configs]
    configs = [c for c, _ in loaded]
    tuning_seeds = {s for _, s in loaded}
    shared = tuning_seeds.pop() if len(tuning_seeds) == 1 else None
    report = harness.evaluate(table, args.response, configs, args.folds, seeds, args.features,
                              harness.resolve_threads(args.threads), shared)
    payload = report.to_dict()
    payload["figure_caption"] = plots.CAPTION
    _write(args.out, dump_json(_artifact(args, payload, [args.input, *args.configs])))
    print(" < ".join(payload["ranking"]))


def cmd_report(args):
    _require_files(args.input)
    report = json.loads(Path(args.input).read_text(encoding="utf-8"))
    if "learners" not in report:
        raise InputError(f"{args.input} is not an evaluate report")
    out = Path(args.out)
    if out.suffix.lower() != f".{args.format}":
        out = out.with_name(out.name + f".{args.format}")
    _require_parent(out)
    text = plots.samples_csv_text(report) if args.format == "csv" else plots.boxplot_svg(report)
    _write(out, text)
    print(out)


# ---------------------------------------------------------------- parser


def _table_opts(p, response=True, response_required=True):
    p.add_argument("--in", dest="input", type=Path, required=True)
    if response:
        p.add_argument("--response", required=response_required, default="total_violations")
    p.add_argument("--missing", choices=MISSING_POLICIES, default="error")
    p.add_argument("--exclude", nargs="+", metavar="COLUMN", help="columns to drop at load")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regbench", description="Regression benchmarking for code-quality tables.")
    parser.add_argument("--version", action="version", version=f"regbench {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="extract multiline code blocks from a posts CSV")
    p.add_argument("--posts", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("join", help="join features, violation counts and posts into the modeling table")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--violations", type=Path, required=True)
    p.add_argument("--posts", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_join)

    p = sub.add_parser("transform", help="skewness-driven column transforms")
    _table_opts(p)
    p.add_argument("--threshold", type=float, default=atlm.DEFAULT_THRESHOLD)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--recipe", type=Path, required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("correlate", help="Kendall tau-b matrix")
    _table_opts(p, response=False)
    p.add_argument("--columns", nargs="+")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("baseline", help="transformed multiple regression baseline")
    _table_opts(p)
    p.add_argument("--threshold", type=float, default=atlm.DEFAULT_THRESHOLD)
    p.add_argument("--recipe", type=Path, help="recipe JSON the input was already transformed with")
    p.add_argument("--predictors", nargs="+")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("tune", help="pick the best of 20 candidate configs by CV RMSE")
    _table_opts(p)
    p.add_argument("--learner", choices=LEARNERS, required=True)
    p.add_argument("--seed", type=int, default=0, help="shared fold seed for tuning")
    p.add_argument("--model-seed", type=int, default=0, help="seed stored in configs (subsampling)")
    p.add_argument("--folds", type=int, default=harness.DEFAULT_K)
    p.add_argument("--max-trees", type=int, help="rescale boosting tree counts so the largest is this")
    p.add_argument("--features", nargs="+")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="repeated k-fold comparison of tuned configs")
    _table_opts(p)
    p.add_argument("--configs", type=Path, nargs="+", required=True)
    p.add_argument("--folds", type=int, default=harness.DEFAULT_K)
    p.add_argument("--seeds", default="1,2")
    p.add_argument("--features", nargs="+")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="export RMSE samples as CSV or an SVG boxplot")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "svg"), required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except (RegbenchError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
