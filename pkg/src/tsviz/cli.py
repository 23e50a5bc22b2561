"""``tsviz`` command line: generate, train, visualize, evaluate, compare, gradcheck.

All commands read one key=value config file (``--config``); ``--seed``,
``--out``, ``--method`` and ``--f-class`` override the matching keys.
Outputs land under ``out``::

    out/data/            generated dataset + manifest.csv
    out/model.tsvz       checkpoint
    out/train.csv        per-epoch report
    out/heatmaps/<m>/    <id>.pgm heatmaps and <id>.mask.pgm threshold masks
    out/eval/            <m>.curve.csv, <m>.aopc.csv, <m>.clusters.csv
    out/compare.csv      summary table

Exit status: 0 success, 2 user or config error, 3 numerical failure.
"""
import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import viz
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import DivergenceError, TsvizError
from .gradcheck import gradcheck
from .imageio import load_dataset, read_ppm, save_dataset, write_pgm
from .network import NetworkConfig, TeacherStudentModel
from .parallel import parallel_map
from .perturbation import (compare_method, format_summary, localization_iou, perturb_image,
                           probability_fn, write_aopc_csv, write_clusters_csv, write_curve_csv,
                           write_summary_csv)
from .synth import generate
from .trainer import TrainConfig, train

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    """Bad config, missing input or other problem the user can fix."""


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "run"
    # dataset
    num_classes: int = 4
    per_class: int = 128
    image_size: int = 32
    train_fraction: float = 0.6
    # network
    channels: list = field(default_factory=lambda: [16, 32, 64])
    fc_width: int = 64
    alpha: float = 0.4
    init: str = "he"
    # training
    learning_rate: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 16
    epochs: int = 15
    clip_norm: float = None
    # explanation and evaluation
    method: str = "all"
    f_class: str = "argmax"
    threshold: float = 0.9
    images: int = 64            # validation images used by evaluate/compare; 0 = all
    # gradcheck
    step: float = 1e-5
    tolerance: float = 1e-5
    max_entries: int = 6
    batch: int = 2

    def network(self):
        return NetworkConfig(image_size=self.image_size, channels=self.channels,
                             fc_width=self.fc_width, num_classes=self.num_classes, alpha=self.alpha)

    def training(self):
        return TrainConfig(learning_rate=self.learning_rate, momentum=self.momentum,
                           batch_size=self.batch_size, epochs=self.epochs, alpha=self.alpha,
                           seed=self.seed, clip_norm=self.clip_norm)

    def methods(self):
        return list(viz.METHODS) if self.method == "all" else [self.method]

    def path(self, *parts):
        return os.path.join(self.out, *parts)


def _convert(name, kind, raw):
    raw = raw.strip()
    try:
        if name == "channels":
            return [int(v) for v in raw.replace(",", " ").split()]
        if name == "clip_norm":
            return None if raw.lower() in ("", "none") else float(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise UsageError(f"config key {name!r}: cannot parse {raw!r}") from None
    return raw


def load_config(path=None, overrides=None):
    """RunConfig from a key=value file (``#`` comments, no sections) plus overrides."""
    kinds = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    if path is not None:
        if not os.path.exists(path):
            raise UsageError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            with open(path) as fh:
                parser.read_string("[run]\n" + fh.read())
        except configparser.Error as e:
            raise UsageError(f"{path}: {e.message.splitlines()[0]}") from None
        for key, raw in parser["run"].items():
            key = key.replace("-", "_")
            if key not in kinds:
                raise UsageError(f"{path}: unknown config key {key!r}")
            values[key] = _convert(key, kinds[key], raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    cfg = RunConfig(**values)
    if cfg.method not in viz.METHODS + ("all",):
        raise UsageError(f"unknown method {cfg.method!r}")
    if cfg.f_class not in ("argmax", "label"):
        raise UsageError(f"f_class must be argmax or label, got {cfg.f_class!r}")
    return cfg


# commands

def _dataset(cfg):
    root = cfg.path("data")
    if not os.path.exists(os.path.join(root, "manifest.csv")):
        raise UsageError(f"no dataset at {root}; run 'tsviz generate' first")
    return load_dataset(root)


def _model(cfg):
    path = cfg.path("model.tsvz")
    if not os.path.exists(path):
        raise UsageError(f"no checkpoint at {path}; run 'tsviz train' first")
    model = load_checkpoint(path)
    if model.config != cfg.network():
        raise UsageError(f"{path} was trained with {model.config}, config asks for {cfg.network()}")
    return model


def _eval_images(cfg, split):
    val = split.validation
    return val if cfg.images <= 0 else val[:cfg.images]


def cmd_generate(cfg, args):
    split = generate(cfg.num_classes, cfg.per_class, cfg.image_size, cfg.seed, cfg.train_fraction)
    manifest = save_dataset(split, cfg.path("data"))
    print(f"wrote {len(split.train)} train / {len(split.validation)} validation images; {manifest}")


def cmd_train(cfg, args):
    split = _dataset(cfg)
    model = TeacherStudentModel(cfg.network(), seed=cfg.seed, init=cfg.init)
    report = train(model, split, cfg.training(), log=print)
    save_checkpoint(model, cfg.path("model.tsvz"))
    report.to_csv(cfg.path("train.csv"))
    print(f"saved {cfg.path('model.tsvz')} and {cfg.path('train.csv')} ({report.wall_time:.1f}s)")


def cmd_visualize(cfg, args):
    model = _model(cfg)
    if args.image:
        img = read_ppm(args.image)
        items = [(os.path.splitext(os.path.basename(args.image))[0], img)]
    else:
        items = [(s.id, s.image) for s in _eval_images(cfg, _dataset(cfg))]
    for method in cfg.methods():
        d = cfg.path("heatmaps", method)
        os.makedirs(d, exist_ok=True)
        for sid, img in items:
            h = viz.explain(model, img, method)
            viz.write_heatmap_pgm(h, os.path.join(d, f"{sid}.pgm"))
            write_pgm(viz.threshold_mask(h, cfg.threshold).astype(float), os.path.join(d, f"{sid}.mask.pgm"))
            if args.image:
                print(f"{method}: mean heatmap {h.values.mean():.4f} -> {d}")
    print(f"wrote heatmaps for {len(items)} image(s) under {cfg.path('heatmaps')}")


def _run_method(cfg, model, samples, method):
    def one(s):
        h = viz.explain(model, s.image, method)
        f = probability_fn(model, s.image, mode=cfg.f_class, label=s.label)
        r = perturb_image(s.image, h, f, image_id=s.id, method=method)
        iou = localization_iou(viz.threshold_mask(h, cfg.threshold), s.lesion_mask) if s.label else None
        return r, h, iou
    out = parallel_map(one, samples)
    results = [r for r, _, _ in out]
    ious = [i for _, _, i in out if i is not None]
    return compare_method(method, results, [h for _, h, _ in out], ious)


def _evaluate(cfg):
    model = _model(cfg)
    samples = _eval_images(cfg, _dataset(cfg))
    d = cfg.path("eval")
    os.makedirs(d, exist_ok=True)
    comps = []
    for method in cfg.methods():
        c = _run_method(cfg, model, samples, method)
        write_curve_csv(c, os.path.join(d, f"{method}.curve.csv"))
        write_aopc_csv(c.results, os.path.join(d, f"{method}.aopc.csv"))
        write_clusters_csv(c, os.path.join(d, f"{method}.clusters.csv"))
        comps.append(c)
    return comps


def cmd_evaluate(cfg, args):
    for c in _evaluate(cfg):
        print(f"{c.method:<10} mean AOPC {c.aopc:.4f}")
    print(f"perturbation tables in {cfg.path('eval')}")


def cmd_compare(cfg, args):
    comps = _evaluate(cfg)
    write_summary_csv(comps, cfg.path("compare.csv"))
    print(format_summary(comps))


def cmd_gradcheck(cfg, args):
    if os.path.exists(cfg.path("model.tsvz")):
        model = _model(cfg)
    else:
        model = TeacherStudentModel(cfg.network(), seed=cfg.seed, init=cfg.init)
    rng = np.random.default_rng(cfg.seed)
    s = cfg.image_size
    batch = [(rng.random((s, s, 3)), int(rng.integers(cfg.num_classes))) for _ in range(cfg.batch)]
    report = gradcheck(model, batch, cfg.step, cfg.tolerance, max_entries=cfg.max_entries or None,
                       seed=cfg.seed)
    print(report.format())
    if not report.passed:
        return EXIT_NUMERIC


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "visualize": cmd_visualize,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "gradcheck": cmd_gradcheck,
}


def build_parser():
    p = argparse.ArgumentParser(prog="tsviz", description="Teacher/Student trainable visualization")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key=value config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help="output directory")
        s.add_argument("--method", choices=viz.METHODS + ("all",))
        s.add_argument("--f-class", dest="f_class", choices=("argmax", "label"))
        if name == "visualize":
            s.add_argument("--image", help="explain one PPM file instead of the validation set")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "out": args.out, "method": args.method,
                                        "f_class": args.f_class})
        os.makedirs(cfg.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args) or EXIT_OK
    except DivergenceError as e:
        print(f"tsviz: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, TsvizError, OSError) as e:
        print(f"tsviz: error: {e}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
