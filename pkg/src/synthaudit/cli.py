"""Command-line audit pipeline.

Subcommands: ``fixture`` (emit toy datasets), ``embed`` (fit and persist
the feature transform, dump 2-D coordinates), ``attack`` (one attack in
one space), ``diversity`` (real-vs-synthetic classifier audit), ``morph``
(condition interpolation demo), ``audit`` (embed, all four attack
variants, diversity, in one tree).

Configuration is TOML; command-line flags override file values. Every
run funnels through one root seed expanded into per-stage sub-seeds by a
labeled SHA-256 derivation, and all outputs (sorted-key JSON, fixed
newline CSV) are byte-deterministic: same config, same bytes.

Exit codes: 0 success, 2 usage, 3 config or validation, 4 I/O,
5 internal inconsistency.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from . import __version__, attack, classifier, conditioning, embedding, fixtures, stats, tensor_io
from .attack import Direction, Space
from .errors import (
    AuditError,
    DivergenceDetected,
    IoFailure,
    MagicMismatch,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedOrder,
)
from .tensor_io import Label, LabeledDataset, Origin

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_INTERNAL = 5

_IO_ERRORS = (IoFailure, MagicMismatch, UnsupportedDtype, UnsupportedOrder,
              TruncatedPayload, OSError)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class PathsConfig:
    train_array: str = ""
    train_manifest: str = ""
    val_array: str = ""
    val_manifest: str = ""
    test_array: str = ""
    test_manifest: str = ""
    synthetic_array: str = ""
    synthetic_manifest: str = ""


@dataclass
class EmbeddingConfig:
    dim: int = 64
    fit_splits: list[str] = field(default_factory=lambda: ["train", "val", "test"])
    max_per_split: int = 0  # 0 = use every sample


@dataclass
class AttackConfig:
    pixel_percentile: float = 1.0
    embedding_percentile: float = 0.1
    cutoffs: list[int] = field(default_factory=lambda: [50, 333])
    per_origin: int = 333
    anomaly_percentile: float = 5.0
    anomaly_reference: str = "test"


@dataclass
class BootstrapConfig:
    n_resamples: int = 2000
    alpha: float = 0.05


@dataclass
class ClassifierConfig:
    learning_rate: float = 1e-4
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 32


@dataclass
class AuditConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seed: int = 0
    strict_shape: bool = False

    def validate(self) -> None:
        for name, p in (("pixel_percentile", self.attack.pixel_percentile),
                        ("embedding_percentile", self.attack.embedding_percentile),
                        ("anomaly_percentile", self.attack.anomaly_percentile)):
            if not 0.0 < p < 100.0:
                raise ValueError(f"{name} {p} outside (0, 100)")
        if any(k < 1 for k in self.attack.cutoffs):
            raise ValueError("cutoffs must be positive")
        if self.attack.per_origin < 1:
            raise ValueError("per_origin must be at least 1")
        if self.embedding.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.bootstrap.n_resamples < 1:
            raise ValueError("n_resamples must be at least 1")
        if not 0.0 < self.bootstrap.alpha < 1.0:
            raise ValueError(f"alpha {self.bootstrap.alpha} outside (0, 1)")
        bad = [s for s in self.embedding.fit_splits if s not in ("train", "val", "test")]
        if bad:
            raise ValueError(f"fit_splits may only name real splits, got {bad}")
        if self.attack.anomaly_reference not in ("train", "val", "test"):
            raise ValueError(f"bad anomaly_reference {self.attack.anomaly_reference!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTION_TYPES = {
    "paths": PathsConfig,
    "embedding": EmbeddingConfig,
    "attack": AttackConfig,
    "bootstrap": BootstrapConfig,
    "classifier": ClassifierConfig,
}


def load_config(path: str | None) -> AuditConfig:
    """Parse TOML into AuditConfig; unknown keys are config errors.

    Relative paths in the [paths] section resolve against the config
    file's own directory, so a fixture directory is portable.
    """
    cfg = AuditConfig()
    if path is None:
        return cfg
    try:
        raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"malformed config {path}: {exc}") from exc
    base = Path(path).resolve().parent
    for section, payload in raw.items():
        if section == "seed":
            cfg.seed = int(payload)
            continue
        if section == "strict_shape":
            cfg.strict_shape = bool(payload)
            continue
        cls = _SECTION_TYPES.get(section)
        if cls is None:
            raise ValueError(f"config {path}: unknown section {section!r}")
        target = getattr(cfg, section)
        names = {f.name for f in dataclasses.fields(cls)}
        for key, value in payload.items():
            if key not in names:
                raise ValueError(f"config {path}: unknown key {section}.{key}")
            if section == "paths" and value:
                value = str((base / value) if not Path(value).is_absolute() else value)
            setattr(target, key, value)
    cfg.validate()
    return cfg


def derive_seed(root_seed: int, label: str) -> int:
    """Stable per-stage sub-seed: low 8 bytes of sha256("root:label")."""
    digest = hashlib.sha256(f"{root_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# output helpers


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            # repr(float(v)) keeps full precision and avoids numpy scalar reprs
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _echo(config: AuditConfig, **params) -> dict:
    return {"config": config.to_dict(), "version": __version__, "params": params}


# ---------------------------------------------------------------------------
# dataset loading


def _require_paths(cfg: AuditConfig, *names: str) -> None:
    missing = [n for n in names if not getattr(cfg.paths, n)]
    if missing:
        raise ValueError(f"config is missing paths: {', '.join(missing)}")


def _load_split(cfg: AuditConfig, name: str) -> LabeledDataset:
    array = getattr(cfg.paths, f"{name}_array")
    manifest = getattr(cfg.paths, f"{name}_manifest")
    ds = tensor_io.load_dataset(array, manifest, name=name)
    expected = tensor_io.CANONICAL_SHAPE if cfg.strict_shape else None
    report = tensor_io.validate_dataset(ds, expected_shape=expected)
    if not report.ok:
        head = "; ".join(
            f"{v.sample_id}: {v.kind} ({v.detail})" for v in report.violations[:5]
        )
        raise ValueError(
            f"split {name!r} failed validation with "
            f"{len(report.violations)} violations: {head}"
        )
    return ds


def _load_all(cfg: AuditConfig) -> dict[str, LabeledDataset]:
    _require_paths(cfg, "train_array", "train_manifest", "val_array", "val_manifest",
                   "test_array", "test_manifest", "synthetic_array",
                   "synthetic_manifest")
    return {name: _load_split(cfg, name) for name in ("train", "val", "test", "synthetic")}


# ---------------------------------------------------------------------------
# stages (shared between single subcommands and the umbrella audit)


def _fit_embedding(cfg: AuditConfig, splits: dict[str, LabeledDataset]):
    pool = []
    rng = np.random.default_rng(derive_seed(cfg.seed, "embed.subset"))
    for name in cfg.embedding.fit_splits:
        samples = splits[name].samples
        cap = cfg.embedding.max_per_split
        if cap and cap < len(samples):
            idx = np.sort(rng.choice(len(samples), size=cap, replace=False))
            samples = [samples[i] for i in idx]
        pool.extend(samples)
    return embedding.fit(pool, dim=cfg.embedding.dim,
                         seed=derive_seed(cfg.seed, "embed.fit"))


def _stage_embed(cfg: AuditConfig, splits: dict[str, LabeledDataset], out: Path):
    model = _fit_embedding(cfg, splits)
    embedding.save_model(model, out / "model.npy", out / "model.json")
    for name, ds in splits.items():
        coords = embedding.transform(model, ds)
        rows = [
            (s.id, s.label.value, s.origin.value, float(coords[i, 0]),
             float(coords[i, 1]) if model.dim > 1 else 0.0)
            for i, s in enumerate(ds.samples)
        ]
        _write_csv(out / f"coords_{name}.csv", ["id", "label", "origin", "x", "y"], rows)
    _write_json(out / "embed.json", _echo(cfg, dim=model.dim,
                                          fit_splits=cfg.embedding.fit_splits,
                                          total_variance=model.total_variance))
    return model


def _stage_attack(cfg: AuditConfig, splits: dict[str, LabeledDataset], out: Path,
                  kind: str, space: Space, model, percentile: float | None = None):
    candidates = tensor_io.build_candidate_set(
        splits["train"], splits["val"], splits["test"],
        per_origin=cfg.attack.per_origin,
        seed=derive_seed(cfg.seed, "candidates"),
    )
    synthetic = splits["synthetic"]
    sub = out / f"attack_{kind}_{space.value}"
    sub.mkdir(parents=True, exist_ok=True)
    if kind == "pairwise":
        report = attack.min_distances(candidates, synthetic, space=space, model=model)
        scores = report.min_distance
        direction = Direction.SMALLEST_FIRST
        threshold = None
        used_percentile = None
        flags = attack.anomaly_flags(
            report, Origin(cfg.attack.anomaly_reference),
            percentile=cfg.attack.anomaly_percentile,
        )
        _write_csv(
            sub / "anomaly.csv", ["id", "origin", "score", "flag"],
            [(report.ids[i], report.origins[i].value, float(scores[i]), int(flags[i]))
             for i in range(len(report.ids))],
        )
    else:
        used_percentile = percentile
        if used_percentile is None:
            used_percentile = (cfg.attack.pixel_percentile if space is Space.PIXEL
                               else cfg.attack.embedding_percentile)
        threshold = attack.neighbor_threshold(candidates, synthetic,
                                              percentile=used_percentile,
                                              space=space, model=model)
        report = attack.cluster_sizes(candidates, synthetic, threshold,
                                      space=space, model=model)
        scores = report.neighbor_count.astype(np.float64)
        direction = Direction.LARGEST_FIRST
    _write_csv(sub / "report.csv", ["id", "origin", "score", "rank"], report.csv_rows())
    table = attack.cutoff_table(scores, report.origins, cfg.attack.cutoffs, direction)
    _write_csv(sub / "cutoff_table.csv", ["cutoff", "p_train", "p_val", "p_test"],
               table.csv_rows())
    curve = attack.cutoff_curve(scores, report.origins, direction)
    _write_csv(sub / "cutoff_curve.csv", ["cutoff", "p_train", "p_val", "p_test"],
               curve.csv_rows())
    aucs = {
        "train_vs_val": attack.attack_auc(scores, report.origins, Origin.TRAIN,
                                          Origin.VAL, direction),
        "train_vs_test": attack.attack_auc(scores, report.origins, Origin.TRAIN,
                                           Origin.TEST, direction),
    }
    payload = _echo(cfg, kind=kind, space=space.value, percentile=used_percentile,
                    threshold=threshold, cutoffs=list(cfg.attack.cutoffs),
                    per_origin=cfg.attack.per_origin)
    payload["auc"] = aucs
    _write_json(sub / "auc.json", payload)
    return table


def _stage_diversity(cfg: AuditConfig, splits: dict[str, LabeledDataset], out: Path,
                     model, n_resamples: int | None = None, alpha: float | None = None):
    n_resamples = cfg.bootstrap.n_resamples if n_resamples is None else n_resamples
    alpha = cfg.bootstrap.alpha if alpha is None else alpha
    train_config = classifier.TrainConfig(
        learning_rate=cfg.classifier.learning_rate,
        momentum=cfg.classifier.momentum,
        epochs=cfg.classifier.epochs,
        batch_size=cfg.classifier.batch_size,
        seed=derive_seed(cfg.seed, "classifier.train"),
    )
    report = classifier.diversity_audit(
        splits["train"], splits["synthetic"], splits["test"], model,
        config=train_config, n_resamples=n_resamples, alpha=alpha,
        bootstrap_seed=derive_seed(cfg.seed, "bootstrap"),
    )
    sub = out / "diversity"
    sub.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict()
    payload.update(_echo(cfg, n_resamples=n_resamples, alpha=alpha))
    _write_json(sub / "report.json", payload)
    for side, ev in (("real", report.real), ("synth", report.synth)):
        for k, curve in enumerate(ev.curves):
            name = tensor_io.LABEL_ORDER[k].value
            _write_csv(sub / f"roc_{side}_{name}.csv", ["fpr", "tpr"], curve.csv_rows())
        _write_csv(sub / f"roc_{side}_macro.csv", ["fpr", "tpr"],
                   ev.macro_curve.csv_rows())
    return report


# ---------------------------------------------------------------------------
# subcommand entry points


def _parse_shape(text: str) -> tuple[int, ...]:
    try:
        shape = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"bad shape {text!r}, want e.g. 9,16,16") from None
    if len(shape) != 3 or any(v < 1 for v in shape):
        raise ValueError(f"bad shape {text!r}, want three positive ints")
    return shape


def cmd_fixture(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shape = _parse_shape(args.shape)
    sizes = dict(n_train=args.n_train, n_val=args.n_val, n_test=args.n_test,
                 n_synthetic=args.n_synthetic, shape=shape, seed=args.seed)
    if min(args.n_train, args.n_val, args.n_test) < 1:
        raise ValueError("split sizes must be at least 1")
    if args.fixture_kind == "leaky":
        fx = fixtures.make_leaky_fixture(epsilon=args.epsilon, **sizes)
    else:
        fx = fixtures.make_private_fixture(matched_synthetic=args.matched_synthetic,
                                           **sizes)
    for name, ds in fx.splits().items():
        tensor_io.save_dataset(ds, out / f"{name}.npy", out / f"{name}.csv")
    _write_json(out / "fixture.json", fx.meta)
    per_origin = min(333, min(args.n_train, args.n_val, args.n_test))
    cutoffs = sorted({min(50, 3 * per_origin), min(333, 3 * per_origin)})
    lines = [f"seed = {args.seed}", "", "[paths]"]
    for name in ("train", "val", "test", "synthetic"):
        lines.append(f'{name}_array = "{name}.npy"')
        lines.append(f'{name}_manifest = "{name}.csv"')
    lines += [
        "",
        "[embedding]",
        f"dim = {min(64, int(np.prod(shape)) - 1, args.n_train - 1)}",
        "",
        "[attack]",
        f"per_origin = {per_origin}",
        f"cutoffs = [{', '.join(str(k) for k in cutoffs)}]",
        "",
    ]
    (out / "audit.toml").write_text("\n".join(lines), encoding="utf-8")
    print(f"fixture written to {out}")


def cmd_embed(args) -> None:
    cfg = _merge_flags(args)
    splits = _load_all(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _stage_embed(cfg, splits, out)
    print(f"embedding written to {out}")


def cmd_attack(args) -> None:
    cfg = _merge_flags(args)
    splits = _load_all(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    space = Space(args.space)
    model = None
    if space is Space.EMBEDDING:
        model_array = out / "model.npy"
        if model_array.exists():
            model = embedding.load_model(model_array, out / "model.json")
        else:
            model = _fit_embedding(cfg, splits)
    _stage_attack(cfg, splits, out, args.kind, space, model,
                  percentile=args.percentile)
    print(f"attack report written to {out / f'attack_{args.kind}_{space.value}'}")


def cmd_diversity(args) -> None:
    cfg = _merge_flags(args)
    splits = _load_all(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_array = out / "model.npy"
    if model_array.exists():
        model = embedding.load_model(model_array, out / "model.json")
    else:
        model = _fit_embedding(cfg, splits)
    _stage_diversity(cfg, splits, out, model,
                     n_resamples=args.resamples, alpha=args.alpha)
    print(f"diversity report written to {out / 'diversity'}")


def cmd_morph(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [label.value for label in tensor_io.LABEL_ORDER]
    src = names.index(args.src)
    dst = names.index(args.dst)
    schedule = conditioning.morph_schedule(src, dst, args.steps)
    shape = _parse_shape(args.shape)
    gen = conditioning.ToyPrivateGenerator(
        shape=shape, seed=derive_seed(args.seed, "morph.generator"))
    z = conditioning.sample_latent(derive_seed(args.seed, "morph.latent"))
    images = [
        conditioning.generate(gen, z, step, sample_id=f"morph-{t:03d}").pixels
        for t, step in enumerate(schedule.steps)
    ]
    tensor_io.save_array(np.stack(images), out / "morph.npy")
    _write_csv(
        out / "morph_schedule.csv",
        ["step"] + [f"w_{n}" for n in names],
        [(t, *map(float, step.weights)) for t, step in enumerate(schedule.steps)],
    )
    _write_json(out / "morph.json", {
        "from": args.src, "to": args.dst, "steps": args.steps,
        "seed": args.seed, "shape": list(shape), "version": __version__,
    })
    print(f"morph written to {out}")


def cmd_audit(args) -> None:
    cfg = _merge_flags(args)
    splits = _load_all(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = _stage_embed(cfg, splits, out)
    for kind in ("pairwise", "distribution"):
        for space in (Space.PIXEL, Space.EMBEDDING):
            _stage_attack(cfg, splits, out, kind, space,
                          model if space is Space.EMBEDDING else None)
    _stage_diversity(cfg, splits, out, model)
    _write_json(out / "audit.json", _echo(
        cfg, stages=["embed", "attack_pairwise_pixel", "attack_pairwise_embedding",
                     "attack_distribution_pixel", "attack_distribution_embedding",
                     "diversity"]))
    print(f"audit written to {out}")


# ---------------------------------------------------------------------------
# argument plumbing


def _merge_flags(args) -> AuditConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "strict_shape", False):
        cfg.strict_shape = True
    if getattr(args, "dim", None) is not None:
        cfg.embedding.dim = args.dim
    if getattr(args, "cutoffs", None) is not None:
        try:
            cfg.attack.cutoffs = [int(v) for v in args.cutoffs.split(",")]
        except ValueError:
            raise ValueError(f"bad cutoffs {args.cutoffs!r}, want e.g. 50,333") from None
    if getattr(args, "resamples", None) is not None:
        cfg.bootstrap.n_resamples = args.resamples
    if getattr(args, "alpha", None) is not None:
        cfg.bootstrap.alpha = args.alpha
    cfg.validate()
    return cfg


def _add_common(parser: argparse.ArgumentParser, *, config: bool = True) -> None:
    if config:
        parser.add_argument("--config", default=None, metavar="<path>")
    parser.add_argument("--seed", type=int, default=None, metavar="<u64>")
    parser.add_argument("--out", default="out", metavar="<dir>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synthaudit",
        description="Privacy and quality audits for synthetic image datasets.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="emit a toy dataset with known ground truth")
    p.add_argument("fixture_kind", choices=["private", "leaky"])
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-val", type=int, default=400)
    p.add_argument("--n-test", type=int, default=400)
    p.add_argument("--n-synthetic", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--matched-synthetic", action="store_true")
    p.add_argument("--shape", default="9,16,16")
    _add_common(p, config=False)
    p.set_defaults(fn=cmd_fixture, seed=0)

    p = sub.add_parser("embed", help="fit the feature transform, dump coordinates")
    _add_common(p)
    p.add_argument("--dim", type=int, default=None, metavar="<int>")
    p.add_argument("--strict-shape", action="store_true")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("attack", help="run one membership-inference attack")
    _add_common(p)
    p.add_argument("--kind", choices=["pairwise", "distribution"], default="pairwise")
    p.add_argument("--space", choices=["pixel", "embedding"], default="pixel")
    p.add_argument("--percentile", type=float, default=None, metavar="<f64>")
    p.add_argument("--cutoffs", default=None, metavar="<csv-ints>")
    p.add_argument("--strict-shape", action="store_true")
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("diversity", help="real-vs-synthetic classifier audit")
    _add_common(p)
    p.add_argument("--resamples", type=int, default=None, metavar="<int>")
    p.add_argument("--alpha", type=float, default=None, metavar="<f64>")
    p.add_argument("--strict-shape", action="store_true")
    p.set_defaults(fn=cmd_diversity)

    p = sub.add_parser("morph", help="interpolate the class condition at fixed latent")
    p.add_argument("--from", dest="src", required=True,
                   choices=[label.value for label in tensor_io.LABEL_ORDER])
    p.add_argument("--to", dest="dst", required=True,
                   choices=[label.value for label in tensor_io.LABEL_ORDER])
    p.add_argument("--steps", type=int, default=4)
    p.add_argument("--shape", default="9,64,64")
    _add_common(p, config=False)
    p.set_defaults(fn=cmd_morph, seed=0)

    p = sub.add_parser("audit", help="full pipeline: embed, attacks, diversity")
    _add_common(p)
    p.add_argument("--dim", type=int, default=None, metavar="<int>")
    p.add_argument("--cutoffs", default=None, metavar="<csv-ints>")
    p.add_argument("--resamples", type=int, default=None, metavar="<int>")
    p.add_argument("--alpha", type=float, default=None, metavar="<f64>")
    p.add_argument("--strict-shape", action="store_true")
    p.set_defaults(fn=cmd_audit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceDetected as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, AuditError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
