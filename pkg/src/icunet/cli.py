"""Command-line entry point: ``icunet <subcommand> [flags]``.

Exit codes: 0 success, 1 runtime failure (one ``error: <Type>: <message>``
line on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import persist
from .ablation import ABLATION_CONFIGS, ABLATION_HEADER, ablation_run
from .baseline import BandpassModel
from .errors import IcunetError, ShapeMismatch
from .losses import LossWeights
from .metrics import bin_error_profile, summarize
from .mixture import ARTIFACT_CLASSES, BRAIN_THRESHOLD, make_pairs
from .network import UNet, UNetConfig, init_params, predict
from .signalgen import (PairedDataset, SignalSet, SynthSpec, contaminate, split_counts,
                        synth_sinusoid_dataset)
from .training import TrainConfig, train

log = logging.getLogger("icunet")


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'low,high', got {text!r}")
    return lo, hi


def _weights(text: str) -> LossWeights:
    try:
        return LossWeights.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory (default .)")
    g.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def _arch_flags(p):
    g = p.add_argument_group("architecture")
    g.add_argument("--base-filters", type=int, default=64, help="filters at the top level (default 64)")
    g.add_argument("--depth", type=int, default=4, help="down/up-sampling levels (default 4)")
    g.add_argument("--kernel-size", type=int, default=3, help="odd convolution width (default 3)")
    g.add_argument("--pool-size", type=int, default=2, help="pooling/upsampling factor (default 2)")


def _train_flags(p, epochs=150, batch=128):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, default=epochs, help=f"epoch budget (default {epochs})")
    g.add_argument("--batch-size", type=int, default=batch, help=f"mini-batch size (default {batch})")
    g.add_argument("--lr", type=float, default=0.01, help="Adam learning rate (default 0.01)")
    g.add_argument("--select-by", choices=("loss", "snr"), default="loss",
                   help="best-epoch criterion: validation ensemble loss or SNR")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="icunet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="sum-of-sinusoids dataset with splits")
    p.add_argument("--samples", type=int, required=True, help="total segment count")
    p.add_argument("--channels", type=int, required=True, help="channels per segment")
    p.add_argument("--length", type=int, required=True, help="samples per segment")
    p.add_argument("--fs", type=float, default=256.0, help="sampling rate in Hz (default 256)")
    p.add_argument("--components", type=int, default=6, help="sinusoids per channel (default 6)")
    p.add_argument("--freq-range", type=_pair, default=(0.0, 50.0), help="Hz, 'low,high'")
    p.add_argument("--amp-range", type=_pair, default=(0.0, 1.0), help="'low,high'")
    p.add_argument("--phase-range", type=_pair, default=(0.0, 2 * np.pi), help="radians, 'low,high'")
    p.add_argument("--noise-snr", type=float, default=None,
                   help="add white noise at this input SNR (dB) and write pairs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mix", parents=[common], help="mixB/mixBnB pairs from IC decompositions")
    p.add_argument("--decomp", type=Path, action="append", required=True,
                   help="decomposition directory (repeatable)")
    p.add_argument("--window", type=int, default=1024, help="segment length (default 1024)")
    p.add_argument("--threshold", type=float, default=BRAIN_THRESHOLD,
                   help="Brain probability threshold, strict (default 0.8)")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("train", parents=[common], help="train a denoiser")
    p.add_argument("--train", type=Path, required=True, help="training dataset")
    p.add_argument("--val", type=Path, required=True, help="validation dataset")
    p.add_argument("--alpha", type=_weights, default=LossWeights(), help="loss weights 'a1,a2,a3,a4'")
    _arch_flags(p)
    _train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", parents=[common], help="run a checkpoint over a dataset")
    p.add_argument("--checkpoint", type=Path, required=True, help="checkpoint directory")
    p.add_argument("--input", type=Path, required=True, help="dataset (pairs use the noisy member)")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", parents=[common], help="MSE/SNR summary and per-bin error")
    p.add_argument("--data", type=Path, required=True, help="dataset holding the clean targets")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint", type=Path, help="model to run on the inputs")
    src.add_argument("--pred", type=Path, help="precomputed reconstructions (e.g. from denoise)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablation", parents=[common], help="five loss configurations, one table")
    p.add_argument("--train", type=Path, required=True, help="training dataset")
    p.add_argument("--val", type=Path, required=True, help="validation dataset")
    p.add_argument("--test", type=Path, required=True, help="test dataset")
    p.add_argument("--init-seed", type=int, default=None, help="shared init seed (default --seed)")
    p.add_argument("--configs", default=",".join(ABLATION_CONFIGS),
                   help="subset of " + ",".join(ABLATION_CONFIGS))
    _arch_flags(p)
    _train_flags(p)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("baseline", parents=[common], help="zero-phase FIR bandpass baseline")
    p.add_argument("--input", type=Path, required=True, help="dataset to filter")
    p.add_argument("--low", type=float, default=1.0, help="low edge in Hz (default 1)")
    p.add_argument("--high", type=float, default=50.0, help="high edge in Hz (default 50)")
    p.add_argument("--taps", type=int, default=255, help="odd filter length (default 255)")
    p.set_defaults(func=cmd_baseline)
    return parser


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args):
    spec = SynthSpec(args.samples, args.channels, args.length, args.fs, args.components,
                     args.freq_range, args.amp_range, args.phase_range, args.seed)
    data = synth_sinusoid_dataset(spec)
    n_train, n_val, n_test = split_counts(args.samples)
    bounds = {"train": (0, n_train), "val": (n_train, n_train + n_val),
              "test": (n_train + n_val, args.samples)}
    sizes = {}
    for name, (lo, hi) in bounds.items():
        part = data.subset(slice(lo, hi))
        if args.noise_snr is not None:
            part = contaminate(part, ["white"], args.noise_snr, seed=args.seed + lo)
        persist.save_dataset(part, args.out / name)
        sizes[name] = len(part)
    print(json.dumps(sizes))


def cmd_mix(args):
    decomps = [persist.load_decomposition(d) for d in args.decomp]
    pairs = make_pairs(decomps, args.window, args.threshold)
    for cls in ARTIFACT_CLASSES:
        if cls.name not in pairs.counts:
            log.warning("no %s ICs in any decomposition; category skipped", cls.name)
    persist.save_dataset(pairs, args.out)
    print(json.dumps(pairs.counts))


def _unet_config(args, channels) -> UNetConfig:
    return UNetConfig(channels, args.base_filters, args.depth, args.kernel_size, args.pool_size)


def _train_config(args, weights) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
                       weights=weights, seed=args.seed, select_by=args.select_by)


def cmd_train(args):
    tr = persist.load_pairs(args.train)
    va = persist.load_pairs(args.val)
    config = _unet_config(args, tr.channels)
    params = init_params(config, args.seed)
    out = args.out

    def on_epoch(record, current, is_best):
        if is_best:
            persist.save_checkpoint(current, config, out / "best")
        if record.epoch == args.epochs:
            persist.save_checkpoint(current, config, out / "last")

    if args.epochs == 0:
        persist.save_checkpoint({k: v.astype(np.float32) for k, v in params.items()},
                                config, out / "best")
    best, report = train(params, config, tr, va, _train_config(args, args.alpha), on_epoch)
    persist.write_history(out / "history.csv", report)
    print(json.dumps({"best_epoch": report.best_epoch,
                      "val_ens": report.best.val_ens if report.best else None,
                      "val_snr": report.best.val_snr if report.best else None}))
    if not args.no_plots and report.history:
        from .plotting import plot_history
        plot_history(report, out / "history.png", args.alpha)


def cmd_denoise(args):
    params, config = persist.load_checkpoint(args.checkpoint)
    data = persist.load_dataset(args.input)
    x = data.noisy if isinstance(data, PairedDataset) else data.data
    if x.shape[1] != config.in_channels:
        raise ShapeMismatch(f"data has {x.shape[1]} channels, checkpoint expects {config.in_channels}")
    y = predict(params, config, x)
    persist.save_dataset(SignalSet(y, data.fs), args.out)
    print(json.dumps({"count": len(y)}))


def cmd_eval(args):
    pairs = persist.load_pairs(args.data)
    if args.checkpoint is not None:
        params, config = persist.load_checkpoint(args.checkpoint)
        if pairs.channels != config.in_channels:
            raise ShapeMismatch(
                f"data has {pairs.channels} channels, checkpoint expects {config.in_channels}")
        model = UNet(params, config)
    else:
        pred = persist.load_dataset(args.pred)
        if not isinstance(pred, SignalSet) or pred.data.shape != pairs.clean.shape:
            raise ShapeMismatch("--pred must be a plain dataset shaped like the targets")
        pairs = PairedDataset(pred.data, pairs.clean, pairs.fs, pairs.categories)
        model = _identity
    summary = summarize(model, pairs)
    freqs, errors = bin_error_profile(model, pairs)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    persist.write_bins(args.out / "bins.csv", freqs, errors)
    if not args.no_plots:
        from .plotting import plot_bins
        plot_bins(freqs, {"model": errors}, args.out / "bins.png")
    print(json.dumps(summary.to_dict()))


def _identity(x):
    return x


def cmd_ablation(args):
    tr, va, te = (persist.load_pairs(p) for p in (args.train, args.val, args.test))
    config = _unet_config(args, tr.channels)
    names = [n.strip() for n in args.configs.split(",") if n.strip()]
    unknown = set(names) - set(ABLATION_CONFIGS)
    if unknown:
        raise ValueError(f"unknown configurations: {sorted(unknown)}")
    configs = {n: ABLATION_CONFIGS[n] for n in names}
    init_seed = args.seed if args.init_seed is None else args.init_seed
    rows = ablation_run(tr, va, te, config, _train_config(args, LossWeights()), init_seed, configs)
    out = args.out
    persist.write_csv(out / "ablation.csv", ABLATION_HEADER, (r.csv_row() for r in rows))
    profiles = {}
    for row in rows:
        persist.write_history(out / "histories" / f"{row.name}.csv", row.report)
        freqs, errors = bin_error_profile(UNet(row.params, config), te)
        persist.write_bins(out / "bins" / f"{row.name}.csv", freqs, errors)
        profiles[row.name] = errors
    if not args.no_plots:
        from .plotting import plot_ablation, plot_bins
        plot_ablation(rows, out / "ablation.png")
        plot_bins(freqs, profiles, out / "bins.png")
    for row in rows:
        t = row.metrics["test"]
        print(json.dumps({"loss": row.name, "epoch_star": row.epoch_star,
                          "test_mse": t.mse_mean, "test_snr": t.snr_mean}))


def cmd_baseline(args):
    data = persist.load_dataset(args.input)
    model = BandpassModel(data.fs, args.low, args.high, args.taps)
    if isinstance(data, PairedDataset):
        out = PairedDataset(model(data.noisy), data.clean, data.fs, data.categories)
    else:
        out = SignalSet(model(data.data), data.fs)
    persist.save_dataset(out, args.out)
    print(json.dumps({"count": len(out)}))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(args.threads):
                args.func(args)
        else:
            args.func(args)
    except (IcunetError, ValueError, OSError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
