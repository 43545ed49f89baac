"""Command-line entry point: ``tab2img {ingest,transform,order,train,report}``.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""
import argparse
import logging
import sys

from . import pipeline
from .config import ConfigError, ExperimentConfig

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--dataset", help="path to the UCI-layout CSV")
    common.add_argument("--transform", type=int, choices=(1, 2, 3),
                        help="1 bar graph, 2 distance matrix, 3 combined")
    common.add_argument("--px", type=int, choices=(1, 2, 4), help="pixel scale")
    common.add_argument("--ordering", choices=("none", "ga", "file"))
    common.add_argument("--seed", type=int)
    common.add_argument("--attempts", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tab2img", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="clean, normalize, split; write manifest")
    sub.add_parser("order", parents=[common], help="covariance-rank field ordering")
    sub.add_parser("transform", parents=[common], help="write one image per record")
    sub.add_parser("train", parents=[common], help="train and evaluate all attempts")
    rep = sub.add_parser("report", parents=[common], help="aggregate report rows")
    rep.add_argument("rows", nargs="*", help="reports.csv files (default: the configured run)")
    return p


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    return cfg.override(dataset=args.dataset, transform=args.transform, px=args.px,
                        ordering=args.ordering, seed=args.seed, attempts=args.attempts,
                        workers=args.workers, out=args.out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        if args.command == "ingest":
            ds = pipeline.cmd_ingest(cfg)
            print(f"{ds.n} records, {ds.d} features -> {cfg.out}/dataset/manifest.jsonl")
        elif args.command == "order":
            result = pipeline.cmd_order(cfg)
            print(f"order {','.join(str(i + 1) for i in result.permutation)} cost {result.cost}")
        elif args.command == "transform":
            print(pipeline.cmd_transform(cfg))
        elif args.command == "train":
            print(pipeline.cmd_train(cfg))
        elif args.command == "report":
            sys.stdout.write(pipeline.cmd_report(cfg, args.rows))
    except ConfigError as exc:
        print(f"tab2img {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # surfaced as a runtime failure with context
        logging.getLogger("tab2img").debug("traceback", exc_info=True)
        print(f"tab2img {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
