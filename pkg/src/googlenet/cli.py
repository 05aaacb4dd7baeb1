"""Command-line surface.

Subcommands: describe, shapes, count, gradcheck, train, eval, crops.
Exit codes: 0 success, 1 validation failure, 2 usage error (argparse).
"""

import argparse
import os
import sys

import numpy as np

from . import accounting, backend, evaluate, gradcheck_suite, imaging, modelio
from . import graph as graph_mod
from . import nets, ppm, reference, train as train_mod
from .errors import FormatError, ShapeError


def _build(args):
    return nets.build_googlenet(
        with_aux=getattr(args, "aux", False),
        classes=getattr(args, "classes", 1000),
        width_divisor=getattr(args, "mini", 1),
    )


def _add_net_flags(sub, classes_default=1000):
    sub.add_argument("--mini", type=int, default=1, metavar="D",
                     help="divide every channel width by D (default 1 = full size)")
    sub.add_argument("--aux", action="store_true", help="attach the two auxiliary heads")
    sub.add_argument("--classes", type=int, default=classes_default)


def cmd_describe(args):
    print(graph_mod.serialize(_build(args)), end="")
    return 0


def cmd_shapes(args):
    graph = _build(args)
    shapes = graph.infer_shapes()
    block_out = {}
    for node in graph.nodes:
        block_out[node.block] = shapes[node.name]
    failures = 0
    for block, want in reference.OUTPUT_SIZES:
        got = block_out.get(block)
        ok = got == want
        failures += not ok
        mark = "ok " if ok else "FAIL"
        print(f"{mark} {block:16s} computed {got} reference {want}")
    total = len(reference.OUTPUT_SIZES)
    print(f"{total - failures}/{total} output sizes match")
    return 1 if failures else 0


def cmd_count(args):
    graph = _build(args)
    report = accounting.cost_report(graph)
    if args.compare_table1:
        try:
            report = accounting.diff_against_table1(report)
        except FormatError as e:
            print(f"cannot compare against the reference table: {e}", file=sys.stderr)
            return 1
    print(accounting.format_report(report, fmt=args.format), end="")
    verdict = accounting.budget_check(report)
    if verdict.applicable:
        print(f"inference multiply-adds: {verdict.total_mult_adds:,} "
              f"({'within' if verdict.ops_within_budget else 'OUTSIDE'} 1.4e9..1.7e9)")
        print(f"inference parameters:    {verdict.total_params:,} "
              f"({'within' if verdict.params_within_budget else 'OUTSIDE'} 6.0e6..7.5e6); "
              f"60M baseline ratio {verdict.param_ratio_vs_60m:.2f}x "
              f"({'>=' if verdict.ratio_at_least_8x else '<'} 8x)")
    else:
        print("budget verdicts: not applicable (width-divided or non-1000-class build)")
    if args.compare_table1 and accounting.unexpected_discrepancies(report):
        print(f"unexpected discrepant rows: {accounting.unexpected_discrepancies(report)}",
              file=sys.stderr)
        return 1
    return 0


def cmd_gradcheck(args):
    worst = 0.0
    for name, err in gradcheck_suite.run_battery(eps=args.eps, seed=args.seed, points=args.points):
        print(f"{name:24s} max relative error {err:.3e}")
        worst = max(worst, err)
    print(f"worst case {worst:.3e} ({'ok' if worst < 1e-5 else 'FAIL'} at 1e-5)")
    return 0 if worst < 1e-5 else 1


def cmd_train(args):
    graph = nets.build_googlenet(with_aux=args.aux, classes=args.classes, width_divisor=args.mini)
    images, labels = train_mod.load_ppm_dataset(args.data, args.labels)
    mean = imaging.dataset_mean(images)
    cfg = train_mod.TrainConfig(
        base_lr=args.base_lr, epochs=args.epochs, batch_size=args.batch_size,
        seed=args.seed, data_seed=args.data_seed, polyak_start=args.polyak_start,
        dropout=not args.no_dropout,
    )
    if args.augment:
        aug_rng = np.random.default_rng(cfg.resolved_data_seed() + 1)
        data = train_mod.prepare_tensors(images, mean, rng=aug_rng, augment=True)
    else:
        data = train_mod.prepare_tensors(images, mean)
    result = train_mod.train(graph, data, labels, cfg,
                             log_path=args.log, manifest_path=args.manifest)
    last = result.log[-1]
    print(f"trained {result.steps} steps; final total loss {last['total_loss']:.4f}")
    if args.out:
        params = result.polyak_params if args.save_polyak and result.polyak_params else result.params
        modelio.save_model(args.out, graph, params)
        print(f"saved {'polyak-averaged ' if args.save_polyak else ''}model to {args.out}")
    return 0


def cmd_eval(args):
    models = []
    for path in args.models:
        graph, params = modelio.load_model(path)
        models.append((graph, params))
    config = evaluate.EnsembleConfig(
        tuple(args.models), crop_mode=f"c{args.crops}",
        pooling="mean" if args.pooling == "mean" else "maxcrop",
    )
    images, labels = train_mod.load_ppm_dataset(args.data, args.labels)
    mean = tuple(float(v) for v in args.mean.split(",")) if args.mean else (0.0, 0.0, 0.0)
    predictions = [
        evaluate.predict(models, img, crop_mode=config.crop_mode, pooling=config.pooling, mean=mean)
        for img in images
    ]
    m = evaluate.metrics(np.stack(predictions), labels)
    print(f"models: {len(models)}  crops: {args.crops}  cost: {config.cost} forward passes/image")
    print(f"examples: {m.n_examples}")
    print(f"top-1 error: {m.top1_error:.4f}")
    print(f"top-5 error: {m.top5_error:.4f}")
    print(f"csv,{len(models)},{args.crops},{config.cost},{m.top1_error},{m.top5_error},{m.n_examples}")
    return 0


def cmd_crops(args):
    image = ppm.read_ppm(args.image)
    crops = imaging.enumerate_crops(image, args.mode)
    if args.dump:
        os.makedirs(args.dump, exist_ok=True)
        for spec, img in crops:
            ppm.write_ppm(os.path.join(args.dump, spec.filename()), img)
    print(f"{len(crops)} crops ({args.mode}) of {args.image}"
          + (f" written to {args.dump}" if args.dump else ""))
    return 0


def make_parser():
    parser = argparse.ArgumentParser(
        prog="googlenet",
        description="From-scratch GoogLeNet/Inception engine: build, audit, train, evaluate.",
    )
    parser.add_argument("--backend", choices=backend.available(), default=None,
                        help="force a kernel backend (default: compiled if built)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="print the layer graph, one line per layer")
    _add_net_flags(p)
    p.set_defaults(fn=cmd_describe)

    p = sub.add_parser("shapes", help="check the forward shape trace against the reference table")
    _add_net_flags(p)
    p.set_defaults(fn=cmd_shapes)

    p = sub.add_parser("count", help="parameter and multiply-add audit")
    _add_net_flags(p)
    p.add_argument("--compare-table1", action="store_true",
                   help="diff against the published per-layer figures")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward rule")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=10, help="random points per operation")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("train", help="train on a PPM directory + labels CSV")
    p.add_argument("--data", required=True, help="directory of .ppm images")
    p.add_argument("--labels", required=True, help="CSV of filename,class-index")
    p.add_argument("--base-lr", type=float, required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data-seed", type=int, default=None,
                   help="separate seed for sampling order (default: --seed)")
    p.add_argument("--mini", type=int, default=1, metavar="D")
    p.add_argument("--aux", action="store_true")
    p.add_argument("--classes", type=int, default=1000)
    p.add_argument("--polyak-start", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--augment", action="store_true",
                   help="random patch sampling + photometric distortion")
    p.add_argument("--no-dropout", action="store_true")
    p.add_argument("--out", help="write the trained model here (.incm)")
    p.add_argument("--save-polyak", action="store_true",
                   help="save the Polyak-averaged parameters instead of the last step")
    p.add_argument("--log", help="metrics CSV path")
    p.add_argument("--manifest", help="run manifest path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="multi-crop / multi-model evaluation")
    p.add_argument("--models", nargs="+", required=True, metavar="MODEL.incm")
    p.add_argument("--crops", type=int, choices=(1, 10, 144), default=144)
    p.add_argument("--pooling", choices=("mean", "maxcrop"), default="mean")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--mean", help="per-channel mean to subtract, e.g. 0.48,0.45,0.40")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("crops", help="enumerate test-time crops of one image")
    p.add_argument("--image", required=True)
    p.add_argument("--dump", metavar="DIR", help="write each crop as PPM into DIR")
    p.add_argument("--mode", choices=("c1", "c10", "c144"), default="c144")
    p.set_defaults(fn=cmd_crops)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.backend:
        backend.kernels = backend.get(args.backend)
        backend.name = args.backend
    try:
        return args.fn(args)
    except (FormatError, ShapeError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
