"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import data as wd
from . import energy, metrics, plotting
from .checkpoint import load_checkpoint
from .config import load_config
from .errors import ConfigError, Wafer2SpikeError
from .layers import Network
from .synthetic import generate_synthetic
from .training import evaluate, train

log = logging.getLogger("wafer2spike")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

TRAIN_LOG = "train_log.txt"
METRICS = "metrics.txt"
CONFUSION = "confusion.csv"
ENERGY = "energy.csv"


class UsageError(Exception):
    pass


def _require(path, what="data file"):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def _ratios(text):
    try:
        return [float(r) for r in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ratios, got {text!r}") from None


# --------------------------------------------------------------------------
# data commands


def cmd_synth(args):
    ds = generate_synthetic(args.per_class, seed=args.seed)
    wd.save_wfm(ds, args.out)
    print(f"wrote {len(ds)} maps to {args.out}")
    if args.gallery:
        plotting.wafer_gallery(ds, wd.CLASS_NAMES, args.gallery)


def cmd_import(args):
    ds = wd.import_csv(_require(args.csv, "CSV file"))
    if args.resize:
        ds = wd.Dataset([wd.resize_nearest(m) for m in ds], ds.provenance)
    wd.save_wfm(ds, args.out)
    print(f"imported {len(ds)} maps into {args.out}")


def _parse_targets(text):
    targets = {}
    for item in text.split(","):
        name, _, count = item.partition("=")
        if not count:
            raise UsageError(f"bad target {item!r}; expected CLASS=COUNT")
        targets[wd._as_label(name)] = int(count)
    return targets


def cmd_augment(args):
    ds = wd.load_wfm(_require(args.data))
    out = wd.augment_minority(ds, _parse_targets(args.targets), seed=args.seed, allow_repeats=args.allow_repeats)
    wd.save_wfm(out, args.out)
    print(f"{len(ds)} -> {len(out)} maps; counts {out.class_counts().tolist()}")


_PART_NAMES = {1: ("all",), 2: ("train", "test"), 3: ("train", "val", "test")}


def cmd_split(args):
    ds = wd.load_wfm(_require(args.data))
    spec = wd.SplitSpec(tuple(args.ratios), args.seed, not args.no_stratify)
    for name, part in zip(_PART_NAMES[len(spec.ratios)], wd.split(ds, spec)):
        path = f"{args.out_prefix}_{name}.wfm"
        wd.save_wfm(part, path)
        print(f"{name}: {len(part)} maps -> {path}")


def cmd_inspect(args):
    path = _require(args.path, "file")
    head = path.read_bytes()[:4]
    if head == wd.MAGIC:
        ds = wd.load_wfm(path)
        sizes = {}
        for m in ds:
            sizes[m.cells.shape] = sizes.get(m.cells.shape, 0) + 1
        print(f"{path}: WFM1, {len(ds)} maps")
        for name, n in zip(wd.CLASS_NAMES, ds.class_counts()):
            print(f"  {name:<10}{n:>8}")
        print("  sizes: " + ", ".join(f"{h}x{w}:{n}" for (h, w), n in sorted(sizes.items())))
        if args.gallery:
            plotting.wafer_gallery(ds, wd.CLASS_NAMES, args.gallery)
    else:
        net, extras = load_checkpoint(path)
        print(f"{path}: W2S1, epoch {extras['epoch']}, T={net.time_steps}, v_thr={net.v_thr}, v_reset={net.v_reset}")
        total = 0
        for name, arr in net.named_parameters():
            total += arr.size
            print(f"  {name:<22}{str(arr.shape):>22}")
        print(f"  parameters: {total}")


# --------------------------------------------------------------------------
# train / eval / energy


def _apply_overrides(cfg, args):
    if args.epochs is not None:
        cfg.train.epochs = args.epochs
    if args.out is not None:
        cfg.output.dir = args.out
    if args.seed is not None:
        cfg.train.seed = args.seed
        cfg.model.seed = args.seed
    if args.data is not None:
        cfg.data.train = args.data
    return cfg


def _datasets(cfg):
    if not cfg.data.train:
        raise ConfigError("data.train is not set")
    full = wd.load_wfm(_require(cfg.data.train))
    if cfg.data.split:
        parts = wd.split(full, wd.SplitSpec(tuple(cfg.data.split), cfg.data.seed, cfg.data.stratified))
        train_ds, eval_ds = parts[0], parts[-1]
    else:
        train_ds, eval_ds = full, full
    if cfg.data.test:
        eval_ds = wd.load_wfm(_require(cfg.data.test))
    return train_ds, eval_ds


def _latest_checkpoint(out):
    found = sorted(out.glob("model_epoch*.w2s"), key=lambda p: int(p.stem[len("model_epoch"):]))
    return found[-1] if found else None


def _write_metrics(report, out):
    (out / METRICS).write_text(metrics.format_report(report, wd.CLASS_NAMES))
    (out / CONFUSION).write_text(metrics.confusion_csv(report.confusion, wd.CLASS_NAMES))
    plotting.confusion_matrix(report.confusion, wd.CLASS_NAMES, out / "confusion.png")
    print(metrics.format_table(report, wd.CLASS_NAMES), end="")


def cmd_train(args):
    cfg = _apply_overrides(load_config(_require(args.config, "config file")), args)
    train_ds, eval_ds = _datasets(cfg)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.to_yaml())
    tcfg = cfg.train_config()

    start, state = 0, None
    ckpt = _latest_checkpoint(out) if args.resume else None
    if ckpt is not None:
        net, extras = load_checkpoint(ckpt)
        start, state = extras["epoch"], extras["state"]
        log.info("resuming from %s (epoch %d)", ckpt, start)
    else:
        net = Network.build(cfg.network_config(), seed=cfg.model.seed)
        (out / TRAIN_LOG).write_text("")

    history = []

    def on_epoch(report):
        history.append(report)
        with open(out / TRAIN_LOG, "a") as fh:
            fh.write(report.log_line() + "\n")
        print(report.log_line(), flush=True)

    x, y = train_ds.to_arrays()
    train((x, y), net, tcfg, checkpoint_dir=out, start_epoch=start, state=state, on_epoch=on_epoch)
    if history:
        plotting.training_curve(history, out / "train_curve.png")
    _write_metrics(evaluate(eval_ds, net, tcfg), out)
    return EXIT_OK


def _check_against_config(net, cfg):
    expected = Network.build(cfg.network_config(), seed=0)
    a = [(n, p.shape) for n, p in expected.named_parameters()]
    b = [(n, p.shape) for n, p in net.named_parameters()]
    if a != b:
        raise ConfigError("checkpoint architecture does not match the model section of the config")


def cmd_eval(args):
    net, _ = load_checkpoint(_require(args.checkpoint, "checkpoint"))
    ds = wd.load_wfm(_require(args.data))
    ratios, seed, stratified = args.ratios, args.split_seed, True
    if args.config:
        cfg = load_config(_require(args.config, "config file"))
        _check_against_config(net, cfg)
        if ratios is None and cfg.data.split:
            ratios, seed, stratified = cfg.data.split, cfg.data.seed, cfg.data.stratified
    if args.split != "all":
        if ratios is None:
            log.info("no split ratios given; evaluating the whole of %s as the %s set", args.data, args.split)
        else:
            names = _PART_NAMES[len(ratios)]
            if args.split not in names:
                raise UsageError(f"split {args.split!r} not available for ratios {ratios}")
            ds = wd.split(ds, wd.SplitSpec(tuple(ratios), seed, stratified))[names.index(args.split)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_metrics(evaluate(ds, net), out)
    return EXIT_OK


def cmd_energy(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.checkpoint is None:
        if args.flops is None and args.sops is None:
            raise UsageError("energy needs --checkpoint, or --flops / --sops for a baseline row")
        report = energy.baseline_row(args.model, flops=args.flops, sops_=args.sops)
    else:
        net, _ = load_checkpoint(_require(args.checkpoint, "checkpoint"))
        if args.T is not None and args.T != net.time_steps:
            raise ConfigError(f"checkpoint was trained with T={net.time_steps}; --T {args.T} cannot be decoded")
        if args.data is None:
            raise UsageError("--data is required to measure firing rates")
        x, _ = wd.load_wfm(_require(args.data)).to_arrays()
        if args.max_samples:
            x = x[: args.max_samples]
        stats = energy.measure_firing_rates(net, x)
        report = energy.estimate_network_energy(net, stats, model=args.model)
        plotting.energy_breakdown(report, out / "energy.png")
    (out / ENERGY).write_text(energy.energy_csv(report))
    print(energy.format_energy_table(report), end="")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="wafer2spike", description="Spiking-network wafer map classifier")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic WFM1 dataset")
    s.add_argument("--per-class", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--gallery", help="also render example maps to this image")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("import", help="convert the CSV import format to WFM1")
    s.add_argument("--csv", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--resize", action="store_true", help="store maps resized to 36x36")
    s.set_defaults(func=cmd_import)

    s = sub.add_parser("augment", help="grow minority classes with D4 transforms")
    s.add_argument("--data", required=True)
    s.add_argument("--targets", required=True, help="e.g. Donut=500,Scratch=800")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--allow-repeats", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("split", help="partition a dataset into train/(val)/test files")
    s.add_argument("--data", required=True)
    s.add_argument("--ratios", type=_ratios, default=[0.8, 0.2])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-stratify", action="store_true")
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--data", help="override data.train")
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int, help="override train and model seeds")
    s.add_argument("--out", help="override output.dir")
    s.add_argument("--resume", action="store_true", help="continue from the newest checkpoint in the output dir")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", choices=["all", "train", "val", "test"], default="all")
    s.add_argument("--ratios", type=_ratios)
    s.add_argument("--split-seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("energy", help="estimate inference energy")
    s.add_argument("--checkpoint")
    s.add_argument("--data")
    s.add_argument("--T", type=int)
    s.add_argument("--max-samples", type=int)
    s.add_argument("--flops", type=float, help="baseline mode: published DNN FLOPs")
    s.add_argument("--sops", type=float, help="baseline mode: published SNN SOPs")
    s.add_argument("--model", default="Wafer2Spike")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("inspect", help="summarise a WFM1 dataset or W2S1 checkpoint")
    s.add_argument("path")
    s.add_argument("--gallery", help="render example maps (datasets only)")
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (Wafer2SpikeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
