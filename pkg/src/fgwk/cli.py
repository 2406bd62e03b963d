"""Command-line entry point: ``fgwk generate|train|eval|ensemble-eval|explain``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import RunConfig
from .ensemble import Variant, ensemble_eval
from .evalkit import ConfusionMatrix, format_table, per_class_metrics, write_metrics_csv
from .estimators import PluginClassifier
from .exceptions import ConfigurationError, FormatError
from .explain import grad_cam, localization_score, overlay, write_ppm
from .synthdata import SPLITS, generate, load_spec, load_split, manifest_hash

logger = logging.getLogger("fgwk")

LOG_COLUMNS = ("epoch", "train_loss", "val_loss", "val_accuracy")
VOTE_COLUMNS = ("sample_id", "pred_base", "pred_lion", "pred_lionfpn", "final", "tie_broken",
                "true_label")


def _write_text_atomic(path, text: str) -> None:
    checkpoint.atomic_write_bytes(path, text.encode("utf-8"))


def _check_corpus(cfg: RunConfig, corpus: Path) -> None:
    spec = load_spec(corpus)
    want = cfg.dataset_spec()
    if len(spec.classes) != len(want.classes):
        raise ConfigurationError(
            "dataset.classes",
            f"corpus at {corpus} has {len(spec.classes)} classes, config expects {len(want.classes)}")
    if spec.image_size != want.image_size:
        raise ConfigurationError(
            "dataset.image_size",
            f"corpus at {corpus} has {spec.image_size}px images, config expects {want.image_size}px")


def _load_models(paths) -> list:
    models = []
    for p in paths:
        clf, _, _ = checkpoint.load(p)
        models.append(clf)
    return models


def _check_data(models, corpus: Path) -> None:
    spec = load_spec(corpus)
    for m in models:
        if m.n_classes_ != len(spec.classes):
            raise FormatError("n_classes", f"model has {m.n_classes_} classes, corpus has {len(spec.classes)}")
        if m.image_size_ != spec.image_size:
            raise FormatError("image_size", f"model expects {m.image_size_}px, corpus has {spec.image_size}px")


# -- commands -----------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = RunConfig.load(args.config)
    out = Path(args.out or cfg.raw["corpus_dir"])
    spec = cfg.dataset_spec()
    start = time.perf_counter()
    generate(spec, out, extra_meta={"config": cfg.snapshot()})
    print(f"corpus written to {out} in {time.perf_counter() - start:.1f}s "
          f"(manifest sha256 {manifest_hash(out)[:16]})")
    return 0


def train_variant(cfg: RunConfig, variant: Variant, corpus: Path, ckpt_path: Path,
                  log_path: Path) -> PluginClassifier:
    """Train one variant on ``corpus``; writes the best-validation checkpoint and the epoch log."""
    if not (corpus / "manifest.tsv").exists():
        raise ConfigurationError("corpus_dir", f"no corpus at {corpus}; run 'generate' first")
    _check_corpus(cfg, corpus)
    train = load_split(corpus, "train")
    val = load_split(corpus, "val")
    clf = PluginClassifier(**cfg.estimator_params(variant))
    log_path.parent.mkdir(parents=True, exist_ok=True)
    tmp_log = log_path.with_name(f".{log_path.name}.partial")
    with open(tmp_log, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        fh.flush()

        def on_epoch(rec):
            writer.writerow([rec["epoch"], repr(rec["train_loss"]),
                             repr(rec.get("val_loss", "")), repr(rec.get("val_accuracy", ""))])
            fh.flush()
            logger.info("%s epoch %d: train %.4f val %.4f acc %.4f", variant.value, rec["epoch"],
                        rec["train_loss"], rec.get("val_loss", np.nan), rec.get("val_accuracy", np.nan))

        clf.fit(train.images, train.labels, val.images, val.labels, on_epoch=on_epoch)
    tmp_log.replace(log_path)
    last = clf.history_[-1] if clf.history_ else {}
    checkpoint.save(ckpt_path, clf, cfg.snapshot(), {
        "variant": variant.value, "seed": cfg.raw["seed"], "epoch": clf.best_epoch_,
        "final_train_loss": last.get("train_loss"), "final_val_loss": last.get("val_loss"),
        "corpus_manifest_sha256": manifest_hash(corpus),
    })
    return clf


def cmd_train(args) -> int:
    cfg = RunConfig.load(args.config).with_overrides(epochs=args.epochs, lr=args.lr,
                                                     batch_size=args.batch_size)
    variant = Variant(args.variant)
    corpus = Path(args.data or cfg.raw["corpus_dir"])
    out_dir = Path(cfg.raw["output_dir"])
    ckpt = Path(args.out or out_dir / f"{variant.value}.ckpt")
    log = Path(args.log or ckpt.with_suffix(".log.csv"))
    clf = train_variant(cfg, variant, corpus, ckpt, log)
    best = max((r.get("val_accuracy", 0) for r in clf.history_), default=float("nan"))
    print(f"{variant.value}: checkpoint {ckpt} (best epoch {clf.best_epoch_}, val accuracy {best:.4f})")
    return 0


def evaluate(clf: PluginClassifier, split) -> dict:
    pred = clf.predict(split.images)
    return per_class_metrics(ConfusionMatrix.from_labels(split.labels, pred, clf.n_classes_))


def cmd_eval(args) -> int:
    corpus = Path(args.data)
    clf, config, meta = checkpoint.load(args.model)
    _check_data([clf], corpus)
    split = load_split(corpus, args.split)
    if len(split) == 0:
        raise ConfigurationError("split", f"split {args.split!r} is empty")
    name = meta.get("variant", Path(args.model).stem)
    report = {name: evaluate(clf, split)}
    print(format_table(report, split.classes))
    if args.out:
        write_metrics_csv(args.out, report, split.classes,
                          meta={"split": args.split, "seed": config.get("seed")})
    return 0


def cmd_ensemble_eval(args) -> int:
    if len(args.models) != 3:
        raise ConfigurationError("models", f"exactly 3 checkpoints required, got {len(args.models)}")
    corpus = Path(args.data)
    models = _load_models(args.models)
    _check_data(models, corpus)
    split = load_split(corpus, args.split)
    if len(split) == 0:
        raise ConfigurationError("split", f"split {args.split!r} is empty")
    reports, records = ensemble_eval(models, split.images, split.labels, split.sample_ids)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(VOTE_COLUMNS)
    for r in records:
        writer.writerow([r.sample_id, *r.votes, r.final, int(r.tie_broken), r.true_label])
    _write_text_atomic(args.out, buf.getvalue())
    metrics_path = args.metrics or str(Path(args.out).with_name(Path(args.out).stem + "_metrics.csv"))
    write_metrics_csv(metrics_path, reports, split.classes, meta={"split": args.split})
    print(format_table(reports, split.classes))
    return 0


def cmd_explain(args) -> int:
    corpus = Path(args.data)
    clf, _, _ = checkpoint.load(args.model)
    _check_data([clf], corpus)
    split = load_split(corpus, args.split)
    idx = np.arange(len(split))
    if args.ids:
        wanted = set(args.ids)
        idx = np.array([i for i in idx if split.sample_ids[i] in wanted], dtype=int)
    if args.limit is not None:
        idx = idx[:args.limit]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    preds = clf.predict(split.images[idx]) if len(idx) else np.zeros(0, int)
    rows = []
    for i, pred in zip(idx, preds):
        hm = grad_cam(clf, split.images[i], int(pred), args.layer)
        score = localization_score(hm, tuple(split.patches[i]))
        name = f"{split.sample_ids[i]}.ppm"
        write_ppm(out / name, overlay(split.images[i], hm))
        rows.append([split.sample_ids[i], int(split.labels[i]), int(pred),
                     int(pred == split.labels[i]), int(score["hit"]), repr(score["mass_in_patch"]),
                     repr(score["centroid"][0]), repr(score["centroid"][1]), name])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_id", "true_label", "pred", "correct", "hit", "mass_in_patch",
                     "centroid_row", "centroid_col", "overlay"])
    writer.writerows(rows)
    _write_text_atomic(out / "localization.csv", buf.getvalue())
    correct = [r for r in rows if r[3]]
    rate = np.mean([r[4] for r in correct]) if correct else float("nan")
    print(f"{len(rows)} overlays written to {out}; hit rate on correct predictions {rate:.3f}")
    return 0


# -- parser -------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .explain import DEFAULT_LAYER

    parser = argparse.ArgumentParser(prog="fgwk", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render and curate the synthetic corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="corpus directory (default: config corpus_dir)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one ensemble member")
    p.add_argument("--config", required=True)
    p.add_argument("--variant", required=True, choices=[v.value for v in Variant])
    p.add_argument("--data", help="corpus directory (default: config corpus_dir)")
    p.add_argument("--out", help="checkpoint path (default: <output_dir>/<variant>.ckpt)")
    p.add_argument("--log", help="training log CSV (default: next to the checkpoint)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test1", choices=SPLITS)
    p.add_argument("--out", help="metrics CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble-eval", help="majority-vote evaluation of three checkpoints")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test1", choices=SPLITS)
    p.add_argument("--out", required=True, help="per-sample vote CSV")
    p.add_argument("--metrics", help="metrics CSV (default: <out>_metrics.csv)")
    p.set_defaults(func=cmd_ensemble_eval)

    p = sub.add_parser("explain", help="Grad-CAM overlays and localisation scores")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test2", choices=SPLITS)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--limit", type=int)
    p.add_argument("--ids", nargs="*", help="only these sample ids")
    p.add_argument("--layer", type=int, default=DEFAULT_LAYER, choices=range(4))
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FormatError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
