"""Command-line entry point: ``netsig <subcommand> [options]``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines, then command-line flags (later sources win).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import evaluation, formats, preprocess, stability, synthetic
from .core import ValidationError
from .evaluation import METHODS, ExperimentConfig


@dataclass(frozen=True)
class RunConfig:
    method: str = "glasso+ss"
    n_g: int = preprocess.DEFAULT_N_GENES
    outlier_threshold: float = preprocess.DEFAULT_OUTLIER_THRESHOLD
    grid_count: int = 50
    grid_min_ratio: float = 1e-3
    ndraw: int = 100
    seed: int = 0
    score_rule: str = "sg"
    stratified: bool = True
    sizes: tuple[int, ...] = evaluation.DEFAULT_SIZES
    folds: int = 5
    expression: str | None = None
    network: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not self.sizes or min(self.sizes) < 1:
            raise ValidationError("sizes must be positive integers (empty signature)")
        paths = [p for p in (self.expression, self.network, self.out) if p]
        if len({str(Path(p).resolve()) for p in paths}) != len(paths):
            raise ValidationError("input and output paths must be distinct")
        self.experiment()  # validates numeric ranges

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(
            n_genes=self.n_g,
            outlier_threshold=self.outlier_threshold,
            folds=self.folds,
            seed=self.seed,
            ndraw=self.ndraw,
            grid_count=self.grid_count,
            grid_min_ratio=self.grid_min_ratio,
            score_rule=self.score_rule,
            stratified=self.stratified,
        )


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def _parse_sizes(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(s) for s in text)
    try:
        return tuple(int(s) for s in str(text).replace(" ", "").split(",") if s)
    except ValueError:
        raise ValidationError(f"bad sizes list: {text!r}") from None


def _coerce(name: str, value):
    if name == "sizes":
        return _parse_sizes(value)
    if name == "stratified":
        return value if isinstance(value, bool) else _parse_bool(value)
    if name in ("n_g", "grid_count", "ndraw", "seed", "folds"):
        return int(value)
    if name in ("outlier_threshold", "grid_min_ratio"):
        return float(value)
    return value


def build_config(args: argparse.Namespace) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    if getattr(args, "config", None):
        for key, value in formats.load_config(args.config).items():
            if key not in known:
                raise ValidationError(f"unknown config key {key!r}")
            values[key] = value
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"invalid config: {exc}") from None


def _add_run_options(p: argparse.ArgumentParser, method=True) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--expression", help="expression TSV")
    p.add_argument("--network", help="edge-list TSV")
    p.add_argument("--out", help="output path")
    if method:
        p.add_argument("--method", choices=METHODS)
    p.add_argument("--n-g", dest="n_g", type=int)
    p.add_argument("--outlier-threshold", type=float)
    p.add_argument("--grid-count", type=int)
    p.add_argument("--grid-min-ratio", type=float)
    p.add_argument("--ndraw", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--score-rule", choices=("sg", "max_prob"))
    p.add_argument("--stratified", dest="stratified", action="store_const", const=True)
    p.add_argument("--no-stratified", dest="stratified", action="store_const", const=False)
    p.add_argument("--sizes", help="comma-separated signature sizes")
    p.add_argument("--folds", type=int)


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if not getattr(cfg, name):
            raise ValidationError(f"--{name} is required")


def _load(cfg: RunConfig, need_network: bool):
    _require(cfg, "expression")
    dataset = formats.load_expression(cfg.expression)
    network = formats.load_network(cfg.network) if cfg.network else None
    if need_network and network is None:
        raise ValidationError("network required for graph methods (--network)")
    return dataset, network


def cmd_synth(args) -> int:
    spec = synthetic.SyntheticSpec(
        p=args.p, n=args.n, network=args.model, degree=args.degree,
        n_components=args.components, component_size=args.component_size,
        effect=args.effect, label_noise=args.label_noise, within_corr=args.within_corr,
        seed=args.seed,
    )
    dataset, network, truth = synthetic.generate(spec)
    out = Path(args.out)
    formats.save_expression(dataset, out / "expression.tsv")
    formats.save_network(network, out / "network.tsv")
    formats.write_json({"spec": spec.to_dict(), "truth": truth.to_dict()}, out / "truth.json")
    print(f"wrote {out}/expression.tsv ({dataset.n_samples} x {dataset.n_genes}), network.tsv, truth.json")
    return 0


def cmd_preprocess(args) -> int:
    cfg = build_config(args)
    _require(cfg, "out")
    dataset, network = _load(cfg, need_network=False)
    model = preprocess.fit(dataset, network, cfg.n_g, cfg.outlier_threshold)
    out = Path(cfg.out)
    formats.save_expression(preprocess.apply(model, dataset), out / "preprocessed.tsv")
    formats.write_json(model.to_dict(), out / "preprocess_model.json")
    print(f"kept {len(model.kept_gene_ids)} of {dataset.n_genes} genes")
    return 0


def cmd_select(args) -> int:
    cfg = build_config(args)
    _require(cfg, "out")
    dataset, network = _load(cfg, evaluation._needs_network(cfg.method))
    size = args.size if args.size is not None else max(cfg.sizes)
    exp = cfg.experiment()
    model = preprocess.fit(dataset, network, exp.n_genes, exp.outlier_threshold)
    ranked = evaluation.rank_units(preprocess.apply(model, dataset), network, cfg.method, exp)
    sig = evaluation.make_signature(ranked, size)
    formats.write_json(
        {
            "method": cfg.method,
            "signature": sig.to_dict(),
            "ranking": evaluation.full_gene_ranking(ranked),
            "config": _jsonable(cfg),
        },
        cfg.out,
    )
    print(f"{len(sig.genes)} genes -> {cfg.out}")
    return 0


def cmd_stability(args) -> int:
    cfg = build_config(args)
    _require(cfg, "out")
    base = cfg.method.replace("+ss", "")
    dataset, network = _load(cfg, base == "glasso")
    exp = cfg.experiment()
    model = preprocess.fit(dataset, network, exp.n_genes, exp.outlier_threshold)
    data = preprocess.apply(model, dataset)
    X, y, selector, groups, genes, grid = evaluation.prepare_selector(data, network, cfg.method, exp)
    profile = stability.run_stability_selection(
        X, y, selector, grid, cfg.ndraw, evaluation.derive_seed(cfg.seed, evaluation.SUBSAMPLE_STREAM), cfg.stratified
    )
    scores = stability.score_profile(profile, cfg.score_rule)
    units = stability.group_units(groups, genes)
    formats.write_json(
        {
            "profile": profile.to_dict(),
            "units": [list(u) if isinstance(u, tuple) else u for u in units],
            "sg": scores.sg.tolist(),
            "max_prob": scores.max_prob.tolist(),
            "ranking": scores.ranking.tolist(),
            "score_rule": cfg.score_rule,
        },
        cfg.out,
    )
    print(f"profile over {profile.n_groups} groups x {len(grid)} lambdas -> {cfg.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = build_config(args)
    _require(cfg, "out")
    dataset, network = _load(cfg, evaluation._needs_network(cfg.method))
    report = evaluation.run_experiment(dataset, network, cfg.method, cfg.sizes, cfg.experiment())
    report.metadata["run_config"] = _jsonable(cfg)
    formats.write_json(report.to_dict(), cfg.out)
    acc = report.mean_accuracy()
    print(f"{cfg.method}: mean balanced accuracy " + ", ".join(f"{m}:{a:.3f}" for m, a in zip(report.sizes, acc)))
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    if args.overlap:
        a, b = (formats.read_json(p) for p in args.overlap)
        sizes = _parse_sizes(args.sizes) if args.sizes else evaluation.DEFAULT_SIZES
        curve = evaluation.cross_dataset_overlap(a["ranking"], b["ranking"], sizes)
        formats.write_curve(zip(sizes, curve), out / "cross_dataset_overlap.tsv", ("size", "overlap"))
        formats.write_json(
            {"sizes": list(sizes), "overlap": curve, "rescaling": "each dataset scaled with its own statistics"},
            out / "cross_dataset_overlap.json",
        )
        print(f"wrote {out}/cross_dataset_overlap.tsv")
        return 0
    if not args.input:
        raise ValidationError("--input (an evaluate report) or --overlap is required")
    report = evaluation.EvaluationReport.from_dict(formats.read_json(args.input))
    if args.format == "json":
        formats.write_json({name: rows for name, rows in report.curves().items()}, out / "curves.json")
    else:
        for name, rows in report.curves().items():
            formats.write_curve(rows, out / f"{report.method}_{name}.tsv", ("size", name))
    print(f"wrote {args.format} curves to {out}")
    return 0


def _jsonable(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["sizes"] = list(cfg.sizes)
    return d


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netsig", description="network-coherent sparse signatures")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with a planted signature")
    p.add_argument("--p", type=int, default=300)
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--model", choices=("regular", "pa"), default="regular")
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--component-size", type=int, default=6)
    p.add_argument("--effect", type=float, default=1.0)
    p.add_argument("--label-noise", type=float, default=0.1)
    p.add_argument("--within-corr", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="filter and scale genes")
    _add_run_options(p, method=False)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("select", help="build one signature on the whole dataset")
    _add_run_options(p)
    p.add_argument("--size", type=int)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("stability", help="selection probabilities and scores")
    _add_run_options(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("evaluate", help="cross-validated evaluation report (JSON)")
    _add_run_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="export curves from a report, or cross-dataset overlap")
    p.add_argument("--input", help="report JSON from `evaluate`")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--overlap", nargs=2, metavar="SIGNATURE_JSON", help="two `select` outputs")
    p.add_argument("--sizes")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_report)
    return parser


def cli_main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
