"""Command-line interface: generate / train / eval / compare / baseline."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import evaluate as ev
from .classical import music, omp, periodogram
from .model import (
    CheckpointError,
    ModelConfig,
    default_config,
    init_model,
    load_checkpoint,
    micro_config,
    toy_config,
)
from .signals import (
    Dataset,
    SceneConfig,
    read_dataset,
    read_records,
    render_target,
    sample_scene,
    synthesize,
    write_dataset,
    write_records,
)
from .train import TrainConfig, train

PRESETS = {"default": default_config, "toy": toy_config, "micro": micro_config}


class ConfigError(Exception):
    pass


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spectralsr",
        description="Spectral super-resolution toolkit: classical estimators, "
        "window-attention models, and Monte Carlo experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a scene/signal dataset")
    gen.add_argument("--n", type=int, required=True, help="number of records")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--signal-dim", type=int, default=64)
    gen.add_argument("--n-sr", type=int, default=4096)
    gen.add_argument("--snr", type=float, default=20.0, help="SNR in dB (inf = noiseless)")
    gen.add_argument("--l-min", type=int, default=1)
    gen.add_argument("--l-max", type=int, default=10)

    tr = sub.add_parser("train", help="train a model from a JSON config")
    tr.add_argument("--config", required=True)
    tr.add_argument("--out", required=True, help="checkpoint path")
    tr.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    tr.add_argument("--log", default=None, help="CSV training log path")

    ev_p = sub.add_parser("eval", help="run one method over a dataset, report PSNR")
    ev_p.add_argument("--data", required=True)
    ev_p.add_argument("--method", default="periodogram",
                      choices=["periodogram", "music", "omp", "model"])
    ev_p.add_argument("--checkpoint", default=None)
    ev_p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    ev_p.add_argument("--seed", type=int, default=0)

    cmp_p = sub.add_parser("compare", help="multi-method Monte Carlo sweeps")
    cmp_p.add_argument("--methods", required=True,
                       help="comma-separated: periodogram,music,omp,model")
    cmp_p.add_argument("--experiment", required=True,
                       choices=["resolution", "psnr", "sidelobe"])
    cmp_p.add_argument("--checkpoint", default=None)
    cmp_p.add_argument("--out", default=None, help="output path prefix")
    cmp_p.add_argument("--seed", type=int, default=0)
    cmp_p.add_argument("--trials", type=int, default=200)
    cmp_p.add_argument("--n", type=int, default=64)
    cmp_p.add_argument("--n-grid", type=int, default=4096)
    cmp_p.add_argument("--snr", type=float, default=20.0)

    base = sub.add_parser("baseline", help="run a classical estimator on a signal file")
    base.add_argument("--method", required=True, choices=["periodogram", "music", "omp"])
    base.add_argument("--data", required=True, help="signal records file")
    base.add_argument("--out", required=True, help="spectrum records file")
    base.add_argument("--n-grid", type=int, default=4096)
    base.add_argument("--order", type=int, default=1, help="model order for music/omp")
    base.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_generate(args):
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    cfg = SceneConfig(l_min=args.l_min, l_max=args.l_max, n_sr=args.n_sr)
    scenes = [sample_scene(rng, cfg) for _ in range(args.n)]
    signals = np.stack(
        [synthesize(s, args.signal_dim, args.snr, rng) for s in scenes]
    )
    meta = {
        "seed": args.seed,
        "snr_db": args.snr,
        "signal_dim": args.signal_dim,
        "n_sr": args.n_sr,
    }
    write_dataset(args.out, Dataset(scenes, signals, meta))
    print(f"wrote {args.n} records to {args.out}")
    return 0


def _load_train_config(path, seed_override):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        model_section = dict(raw.get("model", {}))
        preset = model_section.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown model preset {preset!r}")
            base = PRESETS[preset](model_section.pop("variant", "swinfreq"))
            merged = {**base.__dict__, **model_section}
            model_cfg = ModelConfig(**merged)
        else:
            model_cfg = ModelConfig(**model_section)
        train_cfg = TrainConfig(**raw.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if seed_override is not None:
        train_cfg.seed = seed_override
    return model_cfg, train_cfg


def _cmd_train(args):
    model_cfg, train_cfg = _load_train_config(args.config, args.seed)
    train_cfg.checkpoint_path = args.out
    if args.log:
        train_cfg.log_path = args.log
    rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 100]))
    store = init_model(model_cfg, rng)
    _, history = train(store, train_cfg)
    final = history.losses[-1] if history.losses else float("nan")
    print(f"trained {store.step} steps, final loss {final:.6g}, checkpoint {args.out}")
    if history.val_psnr:
        print(f"validation PSNR {history.val_psnr[-1]:.2f} dB")
    return 0


def _make_methods(names, n_grid, checkpoint_path):
    methods = {}
    checkpoint = None
    for name in names:
        if name == "model":
            if checkpoint_path is None:
                raise ConfigError("the model method requires --checkpoint")
            checkpoint = load_checkpoint(checkpoint_path)
        methods[name] = ev.make_method(name, n_grid, checkpoint)
    return methods


def _cmd_eval(args):
    data = read_dataset(args.data)
    n_sr = int(data.meta.get("n_sr", 4096))
    methods = _make_methods([args.method], n_sr, args.checkpoint)
    method = methods[args.method]
    values = []
    for scene, signal in zip(data.scenes, data.signals):
        target = render_target(scene, n_sr)
        values.append(ev.psnr(method(signal, scene), target))
    report = {
        "method": args.method,
        "records": len(values),
        "mean_psnr_db": float(np.mean(values)),
        "min_psnr_db": float(np.min(values)),
        "max_psnr_db": float(np.max(values)),
        "data_meta": data.meta,
        "seed": args.seed,
        "version": 1,
    }
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_compare(args):
    names = [s.strip() for s in args.methods.split(",") if s.strip()]
    if not names:
        raise ConfigError("--methods must name at least one method")
    methods = _make_methods(names, args.n_grid, args.checkpoint)
    prefix = args.out or f"compare_{args.experiment}"
    if args.experiment == "sidelobe":
        outputs = ev.sidelobe_experiment(
            methods, n=args.n, n_grid=args.n_grid, seed=args.seed
        )
        for key, csv_text in sorted(outputs.items()):
            path = f"{prefix}_{key}.csv"
            with open(path, "w") as fh:
                fh.write(csv_text)
            print(f"wrote {path}")
        return 0
    if args.experiment == "resolution":
        report = ev.resolution_sweep(
            methods, snr_db=args.snr, trials=args.trials, n=args.n,
            n_grid=args.n_grid, seed=args.seed,
        )
    else:
        report = ev.psnr_vs_snr(
            methods, trials=args.trials, n=args.n, n_grid=args.n_grid, seed=args.seed
        )
    with open(prefix + ".json", "w") as fh:
        fh.write(report.to_json())
    with open(prefix + ".csv", "w") as fh:
        fh.write(report.to_csv())
    print(f"wrote {prefix}.json and {prefix}.csv")
    return 0


def _cmd_baseline(args):
    signals = read_records(args.data)
    spectra = []
    for signal in signals:
        if args.method == "periodogram":
            spectra.append(periodogram(signal, n_fft=args.n_grid))
        elif args.method == "music":
            spectra.append(
                music(signal, order=args.order, m=len(signal) // 2, n_grid=args.n_grid)
            )
        else:
            result = omp(signal, args.n_grid, sparsity=args.order)
            spectra.append(ev.omp_spectrum(result, args.n_grid))
    write_records(args.out, np.stack(spectra))
    print(f"wrote {len(spectra)} spectra to {args.out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "baseline": _cmd_baseline,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
