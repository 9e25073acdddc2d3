"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Criterion 4 runs the full desk-scale pipeline (render, augment, train three
seeds of both classifier kinds, evaluate on a never-trained font family), so
this file is the slow part of the suite; everything else is sub-second.
"""

import statistics
import time
from contextlib import contextmanager
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

import conftest
from fontauth import cli
from fontauth.classifier import (
    ClassifierKind,
    build_network,
    output_width,
    train,
)
from fontauth.errors import ChecksumError
from fontauth.fixtures import FIXTURE_NAMES, fixture_counts, fixture_matrix, load_fixture
from fontauth.metrics import (
    evaluate,
    exclusion_sensitivity,
    force_forged_sensitivity,
    format_percent,
)
from fontauth.nncore import (
    TrainConfig,
    network_from_bytes,
    network_to_bytes,
    softmax,
    softmax_xent,
)
from fontauth.synthgen import (
    AugmentationConfig,
    dataset_from_bytes,
    dataset_hash,
    dataset_to_bytes,
    load_dataset,
    save_dataset,
    synthesize_dataset,
    synthesize_role_dataset,
)
from fontauth.verdict import SymbolAssessment, assess_symbol, field_verdict

from conftest import make_toy_dataset
from helpers import fd_gradients, max_rel_error
from test_nncore_layers import GRAD_NETS, smallest_relu_preactivation
from test_verdict import rigged_model

C = ClassifierKind.MULTI_TASK
CPRIME = ClassifierKind.BINARY


@contextmanager
def criterion(number, label, budget_seconds):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        conftest.ACCEPTANCE_LINES.append(f"CRITERION {number}: FAIL ({label})")
        raise
    elapsed = time.monotonic() - start
    conftest.ACCEPTANCE_LINES.append(
        f"CRITERION {number}: PASS ({label}, {elapsed:.1f}s)")
    assert elapsed < budget_seconds, f"criterion {number} exceeded {budget_seconds}s"


def pct(fraction: Fraction) -> float:
    return float(fraction) * 100


def test_criterion_1_table_oracle_reproduction():
    with criterion(1, "table-oracle reproduction", budget_seconds=1.0):
        published = {
            ("idnum", "multi_task"): ("90.77", "87.35"),
            ("idnum", "binary"): ("87.80", "84.16"),
            ("mrz", "multi_task"): ("86.28", "78.55"),
            ("mrz", "binary"): ("88.37", "46.67"),
        }
        for (name, kind_key), (sens, spec) in published.items():
            counts = fixture_counts(name, kind_key)
            assert format_percent(counts.sensitivity()) == sens
            assert format_percent(counts.specificity()) == spec
            assert pct(counts.sensitivity()) == pytest.approx(float(sens), abs=0.005)
            assert pct(counts.specificity()) == pytest.approx(float(spec), abs=0.005)

        # matrix row sums agree exactly with the binary counts
        row_sums = {"idnum": (161237, 16405), "mrz": (206485, 32822)}
        for name, (tp, fn) in row_sums.items():
            matrix = fixture_matrix(name)
            assert matrix.tp() == tp
            assert matrix.fn() == fn

        analyses = {
            "idnum": ({0, 8}, "93.08", "95.12"),
            "mrz": ({0}, "92.56", "94.06"),
        }
        for name, (classes, excl_pct, force_pct) in analyses.items():
            matrix = fixture_matrix(name)
            counts = fixture_counts(name, "multi_task")
            excl = exclusion_sensitivity(matrix, classes)
            force = force_forged_sensitivity(matrix, counts, classes)
            assert format_percent(excl) == excl_pct
            assert format_percent(force) == force_pct
            assert pct(excl) == pytest.approx(float(excl_pct), abs=0.005)
            assert pct(force) == pytest.approx(float(force_pct), abs=0.005)
            assert frozenset(load_fixture(name)["analyses"]["exclusion"]["classes"]) \
                == frozenset(classes)

        # the published exclusion pair is the best same-size subset
        matrix = fixture_matrix("idnum")
        best = max(combinations(range(10), 2),
                   key=lambda pair: exclusion_sensitivity(matrix, pair))
        assert frozenset(best) == frozenset({0, 8})


def test_criterion_2_numerical_core(toy_train, toy_val):
    with criterion(2, "numerical core properties", budget_seconds=30.0):
        # analytic gradients vs central finite differences on every layer kind
        for name, (specs, seed) in sorted(GRAD_NETS.items()):
            from fontauth.nncore import Network

            net = Network((19, 15, 1), specs)
            net.init_params(seed=seed)
            assert net.param_count() <= 1000
            rng = np.random.default_rng(seed + 1000)
            x = rng.uniform(size=(4, 19, 15, 1))
            labels = rng.integers(0, net.output_width, size=4)
            assert smallest_relu_preactivation(net, x) > 5e-4
            _, grad_logits = softmax_xent(net.forward(x), labels)
            analytic = net.backward(grad_logits)
            numeric = fd_gradients(net, x, labels, step=1e-4)
            assert max_rel_error(analytic, numeric) < 1e-4, name

        rows = softmax(np.random.default_rng(0).normal(scale=9.0, size=(50, 20)))
        assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-9)

        cfg = TrainConfig(learning_rate=0.1, momentum=0.8, batch_size=16,
                          epochs=3, seed=5)
        first, _ = train(C, toy_train, toy_val, cfg)
        second, _ = train(C, toy_train, toy_val, cfg)
        assert first.content_hash() == second.content_hash()


def test_criterion_3_architecture_budget():
    with criterion(3, "architecture budget", budget_seconds=5.0):
        net = build_network(C, m=10)
        assert 6000 <= net.param_count() <= 9000
        assert net.output_width == 20
        assert output_width(C, 10) == 20
        assert output_width(CPRIME, 10) == 2
        assert build_network(CPRIME, m=10).output_width == 2


GENTLE_AUGMENTATION = dict(corner_jitter_px=0.5, rescale_range=(0.85, 1.0),
                           blur_sigma_range=(0.0, 0.3), noise_sigma_range=(0.0, 0.02),
                           brightness_range=(-0.05, 0.05), contrast_range=(-0.05, 0.05))


@pytest.fixture(scope="module")
def desk_runs(registry):
    """Render the corpus once and train both kinds across three seeds."""
    start = time.monotonic()
    aug = AugmentationConfig(**GENTLE_AUGMENTATION)
    train_ds = synthesize_dataset(registry, per_cell_count=64, aug_cfg=aug, seed=100)
    val_ds = synthesize_dataset(registry, per_cell_count=12, aug_cfg=aug, seed=200)
    neg_test = synthesize_role_dataset(registry.genuine, forged=False,
                                       per_char_count=30, aug_cfg=aug, seed=300)
    held_test = synthesize_role_dataset(registry.held_out, forged=True,
                                        per_char_count=30, aug_cfg=aug, seed=400)

    runs = {C: [], CPRIME: []}
    for kind in (C, CPRIME):
        for seed in (0, 1, 2):
            cfg = TrainConfig(learning_rate=0.08, momentum=0.8, batch_size=32,
                              epochs=60, seed=seed, lr_decay=0.96)
            model, _ = train(kind, train_ds, val_ds, cfg)
            report = evaluate(model, neg_test, [held_test])
            runs[kind].append({
                "seed": seed,
                "val_accuracy": model.provenance["best_val_accuracy"],
                "sensitivity": float(report.sensitivity()),
                "specificity": float(report.specificity()),
            })
    return {"runs": runs, "elapsed": time.monotonic() - start}


@pytest.mark.slow
def test_criterion_4_desk_scale_end_to_end(registry, desk_runs):
    elapsed = desk_runs["elapsed"]
    runs = desk_runs["runs"]
    with criterion(4, f"desk-scale end-to-end, pipeline {elapsed:.0f}s",
                   budget_seconds=600.0):
        assert elapsed < 600.0
        assert len(registry.genuine) == 1
        assert len(registry.forged) >= 5
        assert len(registry.held_out) >= 2

        for run in runs[C]:
            assert run["val_accuracy"] >= 0.95, run
            assert run["sensitivity"] >= 0.70, run
            assert run["specificity"] >= 0.70, run

        def median_youden(kind):
            return statistics.median(r["sensitivity"] + r["specificity"] - 1.0
                                     for r in runs[kind])

        assert median_youden(C) >= median_youden(CPRIME) - 0.02


def test_criterion_5_verdict_properties():
    with criterion(5, "verdict module properties", budget_seconds=1.0):
        def symbol(flagged, weight, position=0):
            return SymbolAssessment(position=position, std_char=0, std_confidence=weight,
                                    auth_char=0, auth_forged=flagged, flagged=flagged,
                                    weight=weight)

        # one forged symbol out of ten trips a 5% threshold
        field = [symbol(i == 0, 1.0, position=i) for i in range(10)]
        assert field_verdict(field, threshold=0.05).verdict == "forged"
        clean = [symbol(False, 1.0, position=i) for i in range(10)]
        assert field_verdict(clean, threshold=0.05).verdict == "genuine"

        # verdict is monotone in the threshold (at most one flip, forged first)
        verdicts = [field_verdict(field, threshold=t).verdict
                    for t in np.linspace(0.0, 0.99, 25)]
        assert sum(1 for a, b in zip(verdicts, verdicts[1:]) if a != b) <= 1
        assert verdicts[0] == "forged"

        # weight scale invariance
        scaled = [symbol(a.flagged, a.weight * 12.5, position=a.position) for a in field]
        assert field_verdict(scaled).flagged_weight_fraction \
            == pytest.approx(field_verdict(field).flagged_weight_fraction, rel=1e-12)

        # the three decision examples: agree-genuine, forged-font, char-disagreement
        image = np.full((19, 15), 0.5)
        std = rigged_model(ClassifierKind.CHAR_ONLY, 4, peak_class=2)
        agree = rigged_model(C, 4, peak_class=2)
        assert assess_symbol(std, agree, image).flagged is False
        forged_font = rigged_model(C, 4, peak_class=4 + 2)
        assert assess_symbol(std, forged_font, image).flagged is True
        disagreeing = rigged_model(C, 4, peak_class=3)
        assert assess_symbol(std, disagreeing, image).flagged is True


def test_criterion_6_format_round_trips(tmp_path, capsys):
    with criterion(6, "format round-trips and selfcheck", budget_seconds=30.0):
        ds = make_toy_dataset(6, seed=4)
        blob = dataset_to_bytes(ds)
        assert dataset_to_bytes(ds) == blob
        assert dataset_from_bytes(blob) == ds
        path = tmp_path / "ds.ffds"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded == ds
        assert dataset_hash(loaded) == dataset_hash(ds)
        corrupted = bytearray(blob)
        corrupted[len(corrupted) // 2] ^= 0x10
        with pytest.raises(ChecksumError):
            dataset_from_bytes(bytes(corrupted))

        net = build_network(C, m=10, seed=2)
        model_blob = network_to_bytes(net, {"kind": "c"})
        loaded_net, meta = network_from_bytes(model_blob)
        assert meta == {"kind": "c"}
        for a, b in zip(net.params(), loaded_net.params()):
            assert np.array_equal(a, b)
        assert network_to_bytes(loaded_net, meta) == model_blob
        bad = bytearray(model_blob)
        bad[len(bad) // 2] ^= 0x10
        with pytest.raises(ChecksumError):
            network_from_bytes(bytes(bad))

        assert cli.main(["selfcheck"]) == 0
        out = capsys.readouterr().out
        assert "selfcheck: 10/10 checks passed" in out
