"""Command-line surface tying the pipeline together:
font registry -> synthetic datasets -> training -> evaluation -> field verdicts.

Exit codes: 0 success, 1 usage error, 2 data error, 3 check failure.
Commands never leave partial output files (write to temp, atomic rename)
and never embed timestamps, so re-running with unchanged inputs
reproduces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, fixtures, metrics, nncore, verdict as verdict_mod
from .classifier import ClassifierKind, TrainedModel, build_network, load_model, train
from .errors import ConfigError, FontAuthError, TrainingDiverged
from .metrics import format_percent
from .nncore import TrainConfig
from .synthgen import (
    AugmentationConfig,
    RenderConfig,
    dataset_hash,
    load_dataset,
    load_registry,
    read_pgm,
    save_dataset,
    synthesize_dataset,
    synthesize_role_dataset,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK = 3


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors with status 2; this surface reserves
    2 for data errors, so usage problems are remapped to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: str | Path, payload: dict) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def _parse_classes(text: str) -> frozenset[int]:
    try:
        classes = frozenset(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"bad class list {text!r}: {exc}") from None
    if not classes:
        raise ConfigError(f"class list {text!r} is empty")
    return classes


def _apply_config(args: argparse.Namespace, defaults: dict) -> None:
    """Three-layer precedence: explicit flags beat the JSON config file,
    which beats built-in defaults. Flags left at None were not given."""
    file_values = {}
    if getattr(args, "config", None):
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
    for key, value in file_values.items():
        dest = key.replace("-", "_")
        if dest not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)
    for dest, value in defaults.items():
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)


def _snapshot(args: argparse.Namespace, keys) -> dict:
    return {key: getattr(args, key) for key in sorted(keys)}


# --- synth -------------------------------------------------------------------

_SYNTH_DEFAULTS = {"per_cell": 32, "seed": 0, "split": "train", "no_augment": False}


def cmd_synth(args: argparse.Namespace) -> int:
    _apply_config(args, _SYNTH_DEFAULTS)
    registry = load_registry(args.registry)
    render_cfg = RenderConfig()
    aug_cfg = AugmentationConfig.identity() if args.no_augment else AugmentationConfig()

    if args.split == "train":
        ds = synthesize_dataset(registry, per_cell_count=args.per_cell,
                                render_cfg=render_cfg, aug_cfg=aug_cfg, seed=args.seed)
    else:
        fonts, forged = {
            "genuine": (registry.genuine, False),
            "forged": (registry.forged, True),
            "held-out": (registry.held_out, True),
        }[args.split]
        ds = synthesize_role_dataset(fonts, forged=forged, per_char_count=args.per_cell,
                                     render_cfg=render_cfg, aug_cfg=aug_cfg, seed=args.seed)

    ds.provenance["tool_version"] = __version__
    ds.provenance["config"] = _snapshot(args, _SYNTH_DEFAULTS)
    ds.provenance["inputs"] = {"registry_sha256": _sha256_file(args.registry)}
    save_dataset(ds, args.out)

    print(f"samples: {len(ds.samples)}")
    for (char_index, forged), count in sorted(ds.cell_counts().items()):
        flag = "forged " if forged else "genuine"
        print(f"  char {char_index} {flag}: {count}")
    print(f"dataset hash: {dataset_hash(ds)}")
    print(f"wrote {args.out}")
    return EXIT_OK


# --- train -------------------------------------------------------------------

_TRAIN_DEFAULTS = {"kind": "c", "seed": 0, "epochs": 30, "lr": 0.05, "momentum": 0.9,
                   "batch_size": 32, "lr_decay": 0.97}


def cmd_train(args: argparse.Namespace) -> int:
    _apply_config(args, _TRAIN_DEFAULTS)
    kind = ClassifierKind.from_string(args.kind)
    cfg = TrainConfig(learning_rate=args.lr, momentum=args.momentum,
                      batch_size=args.batch_size, epochs=args.epochs,
                      seed=args.seed, lr_decay=args.lr_decay)
    train_ds = load_dataset(args.data)
    val_ds = load_dataset(args.val)

    model, log = train(kind, train_ds, val_ds, cfg)
    for entry in log:
        print(f"epoch {entry['epoch']}: loss {entry['train_loss']:.4f} "
              f"val {entry['val_accuracy']:.4f} lr {entry['lr']:.5f}")

    model.provenance["tool_version"] = __version__
    model.provenance["config"] = _snapshot(args, _TRAIN_DEFAULTS)
    model.provenance["inputs"] = {
        "train_sha256": _sha256_file(args.data),
        "val_sha256": _sha256_file(args.val),
    }
    model.save(args.out)
    print(f"best epoch: {model.provenance['best_epoch']} "
          f"(val {model.provenance['best_val_accuracy']:.4f})")
    print(f"model hash: {model.content_hash()}")
    print(f"wrote {args.out}")
    return EXIT_OK


# --- eval --------------------------------------------------------------------

def _print_analyses(report: metrics.EvalReport, exclude: frozenset[int] | None,
                    force: frozenset[int] | None) -> None:
    if exclude is None and force is None:
        return
    if report.matrix is None:
        raise ConfigError("per-class analyses need a multi-task report "
                          "(binary reports carry no per-class matrix)")
    if exclude is not None:
        value = metrics.exclusion_sensitivity(report.matrix, exclude)
        names = ",".join(str(c) for c in sorted(exclude))
        print(f"exclusion sensitivity (without classes {names}): {format_percent(value)}%")
    if force is not None:
        value = metrics.force_forged_sensitivity(report.matrix, report.overall, force)
        names = ",".join(str(c) for c in sorted(force))
        print(f"force-forged sensitivity (classes {names}): {format_percent(value)}%")


def cmd_eval(args: argparse.Namespace) -> int:
    exclude = _parse_classes(args.exclude) if args.exclude else None
    force = _parse_classes(args.force_forged) if args.force_forged else None

    if args.from_report:
        if args.model or args.negative or args.positive or args.out:
            raise ConfigError("--from-report replaces --model/--negative/--positive/--out")
        report = metrics.load_report(args.from_report)
    else:
        if not (args.model and args.negative and args.positive and args.out):
            raise ConfigError("eval needs --model, --negative, --positive and --out "
                              "(or --from-report)")
        model = load_model(args.model)
        negative = load_dataset(args.negative)
        positives = [load_dataset(p) for p in args.positive]
        report = metrics.evaluate(model, negative, positives)
        report.provenance["tool_version"] = __version__
        report.provenance["config"] = {
            "exclude": sorted(exclude) if exclude else None,
            "force_forged": sorted(force) if force else None,
        }
        report.provenance["inputs"] = {
            "model_sha256": _sha256_file(args.model),
            "negative_sha256": _sha256_file(args.negative),
            "positive_sha256": [_sha256_file(p) for p in args.positive],
        }
        metrics.save_report(report, args.out)
        print(f"wrote {args.out}")

    print(f"sensitivity: {format_percent(report.sensitivity())}%")
    print(f"specificity: {format_percent(report.specificity())}%")
    _print_analyses(report, exclude, force)

    if args.matrix_csv:
        if report.matrix is None:
            raise ConfigError("report carries no per-class matrix")
        metrics.save_matrix_csv(report.matrix, args.matrix_csv)
        print(f"wrote {args.matrix_csv}")
    if args.counts_csv:
        metrics.save_counts_csv(report, args.counts_csv)
        print(f"wrote {args.counts_csv}")
    return EXIT_OK


# --- verify ------------------------------------------------------------------

_VERIFY_DEFAULTS = {"threshold": verdict_mod.DEFAULT_THRESHOLD, "force_low_recall": False}


def cmd_verify(args: argparse.Namespace) -> int:
    _apply_config(args, _VERIFY_DEFAULTS)
    std_model = load_model(args.std_model)
    auth_model = load_model(args.auth_model)

    field_dir = Path(args.field)
    if not field_dir.is_dir():
        raise ConfigError(f"{args.field} is not a directory of symbol crops")
    crops = sorted(field_dir.glob("*.pgm"))
    if not crops:
        raise ConfigError(f"no .pgm symbol crops in {args.field}")
    images = [read_pgm(p) for p in crops]

    reliability = None
    force_classes = None
    if args.reliability_from:
        report = metrics.load_report(args.reliability_from)
        if report.matrix is None:
            raise ConfigError("reliability table needs a multi-task report")
        reliability = verdict_mod.build_reliability_table(report.matrix)
        if args.force_low_recall:
            force_classes = verdict_mod.low_recall_classes(report.matrix)
    elif args.force_low_recall:
        raise ConfigError("--force-low-recall needs --reliability-from")

    assessments = verdict_mod.assess_field(std_model, auth_model, images,
                                           reliability=reliability,
                                           force_flag_classes=force_classes)
    result = verdict_mod.field_verdict(assessments, threshold=args.threshold)

    for a, path in zip(result.assessments, crops):
        mark = "FLAG" if a.flagged else "ok  "
        auth_char = "-" if a.auth_char is None else str(a.auth_char)
        print(f"{mark} {path.name}: read {a.std_char} (conf {a.std_confidence:.3f}, "
              f"weight {a.weight:.3f}); authenticity read {auth_char} "
              f"{'forged' if a.auth_forged else 'genuine'}")
    print(f"flagged weight fraction: {result.flagged_weight_fraction:.4f} "
          f"(threshold {result.threshold})")
    if result.weights_degenerate:
        print("note: all weights were zero; unweighted fraction used")
    print(f"verdict: {result.verdict}")

    if args.out:
        payload = {
            "format": "fontauth-verdict",
            "version": 1,
            "tool_version": __version__,
            "config": _snapshot(args, _VERIFY_DEFAULTS),
            "inputs": {
                "std_model_sha256": _sha256_file(args.std_model),
                "auth_model_sha256": _sha256_file(args.auth_model),
                "crops": [p.name for p in crops],
            },
            "result": result.to_dict(),
        }
        _write_json(args.out, payload)
        print(f"wrote {args.out}")
    return EXIT_OK


# --- report ------------------------------------------------------------------

def cmd_report(args: argparse.Namespace) -> int:
    report = metrics.load_report(args.report)
    print(f"overall: sensitivity {format_percent(report.sensitivity())}% "
          f"specificity {format_percent(report.specificity())}%")
    for name, c in sorted(report.per_set.items()):
        print(f"  {name}: tp={c.tp} tn={c.tn} fp={c.fp} fn={c.fn}")
    if report.matrix is not None:
        print("font-miss-rate ranking (worst first):")
        for char_class, rate in metrics.rank_font_miss_rates(report.matrix):
            print(f"  class {char_class}: {format_percent(rate)}%")
    if args.matrix_csv:
        if report.matrix is None:
            raise ConfigError("report carries no per-class matrix")
        metrics.save_matrix_csv(report.matrix, args.matrix_csv)
        print(f"wrote {args.matrix_csv}")
    if args.counts_csv:
        metrics.save_counts_csv(report, args.counts_csv)
        print(f"wrote {args.counts_csv}")
    return EXIT_OK


# --- selfcheck ---------------------------------------------------------------

def _check_fixture_percentages(name: str) -> None:
    raw = fixtures.load_fixture(name)
    for kind_key in ("multi_task", "binary"):
        counts = fixtures.fixture_counts(name, kind_key)
        expected = raw[kind_key]
        got_sens = format_percent(counts.sensitivity())
        got_spec = format_percent(counts.specificity())
        if got_sens != expected["sensitivity_pct"]:
            raise AssertionError(f"{name}/{kind_key} sensitivity {got_sens} "
                                 f"!= {expected['sensitivity_pct']}")
        if got_spec != expected["specificity_pct"]:
            raise AssertionError(f"{name}/{kind_key} specificity {got_spec} "
                                 f"!= {expected['specificity_pct']}")


def _check_fixture_matrix(name: str) -> None:
    counts = fixtures.fixture_counts(name, "multi_task")
    matrix = fixtures.fixture_matrix(name)
    if matrix.tp() != counts.tp or matrix.fn() != counts.fn:
        raise AssertionError(f"{name} matrix row sums {matrix.tp()}/{matrix.fn()} "
                             f"!= counts {counts.tp}/{counts.fn}")


def _best_subset(matrix: metrics.ModifiedConfusionMatrix, size: int) -> frozenset[int]:
    from itertools import combinations

    best, best_value = None, None
    for combo in combinations(range(matrix.num_classes), size):
        value = metrics.exclusion_sensitivity(matrix, combo)
        if best_value is None or value > best_value:
            best, best_value = frozenset(combo), value
    return best


def _check_fixture_analyses(name: str) -> None:
    raw = fixtures.load_fixture(name)
    matrix = fixtures.fixture_matrix(name)
    counts = fixtures.fixture_counts(name, "multi_task")

    excl = raw["analyses"]["exclusion"]
    classes = frozenset(excl["classes"])
    got = format_percent(metrics.exclusion_sensitivity(matrix, classes))
    if got != excl["sensitivity_pct"]:
        raise AssertionError(f"{name} exclusion {got} != {excl['sensitivity_pct']}")
    if _best_subset(matrix, len(classes)) != classes:
        raise AssertionError(f"{name} exclusion classes {sorted(classes)} are not "
                             f"the best same-size subset")

    forced = raw["analyses"]["force_forged"]
    got = format_percent(metrics.force_forged_sensitivity(
        matrix, counts, frozenset(forced["classes"])))
    if got != forced["sensitivity_pct"]:
        raise AssertionError(f"{name} force-forged {got} != {forced['sensitivity_pct']}")


def _check_softmax() -> None:
    rng = np.random.default_rng(7)
    logits = rng.normal(scale=8.0, size=(64, 20))
    rows = nncore.softmax(logits).sum(axis=1)
    worst = float(np.abs(rows - 1.0).max())
    if worst > 1e-9:
        raise AssertionError(f"softmax row sums off by {worst:.3e}")


def _check_gradients() -> None:
    specs = (
        nncore.LayerSpec(kind="conv2d", kernel_h=3, kernel_w=3, in_channels=1,
                         out_channels=2, stride=2, padding=1),
        nncore.LayerSpec(kind="activation", activation="relu"),
        nncore.LayerSpec(kind="fully_connected", in_features=160, out_features=3),
    )
    net = nncore.Network(input_shape=(19, 15, 1), specs=specs)
    net.init_params(seed=11)
    rng = np.random.default_rng(13)
    x = rng.uniform(size=(4, 19, 15, 1))
    labels = rng.integers(0, 3, size=4)
    worst = nncore.max_relative_gradient_error(net, x, labels, step=1e-4)
    if worst >= 1e-4:
        raise AssertionError(f"gradient check failed: max relative error {worst:.3e}")


def _check_network_roundtrip() -> None:
    net = build_network(ClassifierKind.MULTI_TASK, m=10, seed=3)
    blob = nncore.network_to_bytes(net, {"kind": "c", "M": 10})
    loaded, meta = nncore.network_from_bytes(blob)
    for a, b in zip(net.params(), loaded.params()):
        if a.dtype != b.dtype or not np.array_equal(a, b):
            raise AssertionError("network round-trip changed parameters")
    if meta["kind"] != "c":
        raise AssertionError("network round-trip changed metadata")
    corrupted = bytearray(blob)
    corrupted[len(corrupted) // 2] ^= 0xFF
    try:
        nncore.network_from_bytes(bytes(corrupted))
    except FontAuthError:
        return
    raise AssertionError("corrupted network blob was accepted")


def _check_dataset_roundtrip() -> None:
    from .synthgen import Dataset, GlyphSample, dataset_from_bytes, dataset_to_bytes, quantize

    rng = np.random.default_rng(5)
    samples = [GlyphSample(image=quantize(rng.uniform(size=(19, 15))),
                           char_index=i % 10, font_id=f"font-{i % 3}", forged=bool(i % 2))
               for i in range(20)]
    ds = Dataset(samples=samples, alphabet_size=10, provenance={"generator": "selfcheck"})
    blob = dataset_to_bytes(ds)
    if dataset_from_bytes(blob) != ds:
        raise AssertionError("dataset round-trip changed samples")
    corrupted = bytearray(blob)
    corrupted[len(corrupted) // 2] ^= 0xFF
    try:
        dataset_from_bytes(bytes(corrupted))
    except FontAuthError:
        return
    raise AssertionError("corrupted dataset blob was accepted")


def cmd_selfcheck(args: argparse.Namespace) -> int:
    checks = []
    for name in fixtures.FIXTURE_NAMES:
        checks.append((f"reference percentages ({name})",
                       lambda n=name: _check_fixture_percentages(n)))
        checks.append((f"matrix row sums ({name})",
                       lambda n=name: _check_fixture_matrix(n)))
        checks.append((f"per-class analyses ({name})",
                       lambda n=name: _check_fixture_analyses(n)))
    checks += [
        ("softmax normalization", _check_softmax),
        ("analytic gradients vs finite differences", _check_gradients),
        ("network serialization round-trip", _check_network_roundtrip),
        ("dataset serialization round-trip", _check_dataset_roundtrip),
    ]

    failed = 0
    for label, fn in checks:
        try:
            fn()
        except Exception as exc:
            failed += 1
            print(f"FAIL - {label}: {exc}")
        else:
            print(f"ok   - {label}")
    total = len(checks)
    print(f"selfcheck: {total - failed}/{total} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


# --- parser ------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="fontauth",
                     description="Detect characters printed in a non-standard font.")
    parser.add_argument("--version", action="version", version=f"fontauth {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="render a synthetic glyph dataset from a font registry")
    p.add_argument("--registry", required=True, help="font registry manifest (JSON)")
    p.add_argument("--out", required=True, help="output dataset file")
    p.add_argument("--split", choices=("train", "genuine", "forged", "held-out"))
    p.add_argument("--per-cell", type=int, dest="per_cell",
                   help="samples per character class and authenticity flag")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-augment", action="store_const", const=True, dest="no_augment")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a classifier on a dataset file")
    p.add_argument("--data", required=True, help="training dataset file")
    p.add_argument("--val", required=True, help="validation dataset file")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--kind", choices=("c", "cprime", "std"),
                   help="c: character+authenticity; cprime: authenticity only; "
                        "std: character only")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr-decay", type=float, dest="lr_decay")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model or re-analyze a saved report")
    p.add_argument("--model", help="model file")
    p.add_argument("--negative", help="genuine-labeled dataset file")
    p.add_argument("--positive", nargs="+", help="forged-labeled dataset files")
    p.add_argument("--out", help="output report file (JSON)")
    p.add_argument("--from-report", dest="from_report",
                   help="re-analyze an existing report instead of running a model")
    p.add_argument("--exclude", help="comma-separated character classes to drop")
    p.add_argument("--force-forged", dest="force_forged",
                   help="comma-separated character classes to always call forged")
    p.add_argument("--matrix-csv", dest="matrix_csv")
    p.add_argument("--counts-csv", dest="counts_csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="judge one field from a directory of symbol crops")
    p.add_argument("--std-model", required=True, dest="std_model",
                   help="character-only model file")
    p.add_argument("--auth-model", required=True, dest="auth_model",
                   help="multi-task model file")
    p.add_argument("--field", required=True, help="directory of per-symbol .pgm crops")
    p.add_argument("--threshold", type=float,
                   help="flagged-weight fraction above which the field is forged")
    p.add_argument("--reliability-from", dest="reliability_from",
                   help="multi-task report whose matrix sets per-class weights")
    p.add_argument("--force-low-recall", action="store_const", const=True,
                   dest="force_low_recall",
                   help="always flag classes whose font recall is below 0.5")
    p.add_argument("--out", help="optional verdict file (JSON)")
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="print a saved evaluation report")
    p.add_argument("--report", required=True, help="report file (JSON)")
    p.add_argument("--matrix-csv", dest="matrix_csv")
    p.add_argument("--counts-csv", dest="counts_csv")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selfcheck", help="run the built-in reference and numeric checks")
    p.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fontauth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"fontauth: check failure: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (FontAuthError, ValueError, OSError) as exc:
        print(f"fontauth: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
