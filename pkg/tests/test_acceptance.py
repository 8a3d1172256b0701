"""Acceptance suite: one test per release criterion, each printing a
pass/fail line. Run with `pytest tests/test_acceptance.py -v -s`."""
import json
import random
import re

import pytest

from detinfuse.cli import EXIT_OK, main
from detinfuse.geometry import Detection, NormBox, OcrSpan, Thresholds, filter_by_confidence
from detinfuse.scoring import BenchSample, delta, gqa_star_filter, valse_score
from detinfuse.textgen import (
    InfusionText,
    apply_budget,
    build_od_sentence,
    build_ocr_sentence,
)
from helpers import random_detections, scan_tokens, ungrouped_box_sentence
from synth import make_synthetic_corpus

PAPER_OD = (
    "Here are the central coordinates of certain objects in this image: "
    "2 people:{[0.25, 0.12], [0.11, 0.43]}, 1 cake:{[0.42, 0.32]}."
)
PAPER_OCR = (
    "Here are the central coordinates of certain texts in this image: "
    "'Birthday'[0.41, 0.85], 'YEARS'[0.11, 0.34]."
)


def report(name: str, ok: bool):
    print(f"{'PASS' if ok else 'FAIL'}: {name}")
    assert ok, name


def test_criterion_byte_exact_templates():
    dets = [
        Detection("person", NormBox(0.25, 0.12, 0.1, 0.1), 0.8),
        Detection("person", NormBox(0.11, 0.43, 0.1, 0.1), 0.7),
        Detection("cake", NormBox(0.42, 0.32, 0.1, 0.1), 0.9),
    ]
    spans = [
        OcrSpan("Birthday", NormBox(0.41, 0.85, 0.1, 0.05), 0.95),
        OcrSpan("YEARS", NormBox(0.11, 0.34, 0.1, 0.05), 0.9),
    ]
    ok = (
        build_od_sentence(dets, Thresholds()).sentence == PAPER_OD
        and build_ocr_sentence(spans, Thresholds()).sentence == PAPER_OCR
    )
    report("byte-exact sentence templates", ok)


def test_criterion_delta_reproduction():
    base_7b = {
        "vqav2": 78.5, "gqa_star": 79.6, "textvqa": 58.2, "pope": 85.9,
        "mme": 1866.4, "mmb": 64.3, "mmb_cn": 58.3, "mmvet": 30.5, "seed": 58.6,
    }
    ftbi_7b = {
        "vqav2": 79.0, "gqa_star": 80.1, "textvqa": 60.1, "pope": 88.9,
        "mme": 1880.5, "mmb": 67.3, "mmb_cn": 60.2, "mmvet": 35.2, "seed": 60.8,
    }
    base_13b = {
        "vqav2": 80.0, "gqa_star": 81.0, "textvqa": 61.3, "pope": 85.9,
        "mme": 1826.7, "mmb": 67.7, "mmb_cn": 63.6, "mmvet": 35.4, "seed": 61.6,
    }
    tfi_13b = {
        "vqav2": 76.6, "gqa_star": 79.0, "textvqa": 59.6, "pope": 88.3,
        "mme": 1854.6, "mmb": 65.0, "mmb_cn": 57.5, "mmvet": 31.7, "seed": 60.7,
    }
    ftbi_13b = {
        "vqav2": 80.3, "gqa_star": 81.8, "textvqa": 61.8, "pope": 88.8,
        "mme": 1920.5, "mmb": 71.4, "mmb_cn": 65.2, "mmvet": 38.9, "seed": 62.3,
    }
    ok = (
        abs(delta(base_7b, ftbi_7b) - 3.99) <= 0.01
        and abs(delta(base_13b, tfi_13b) - (-3.41)) <= 0.01
        and abs(delta(base_13b, ftbi_13b) - 3.30) <= 0.01
    )
    report("aggregate improvement reproduction (+3.99 / -3.41 / +3.30)", ok)


def test_criterion_valse_oracle_equivalence():
    rng = random.Random(1234)
    ok = True
    for _ in range(1000):
        n = rng.randint(1, 200)
        replies = [
            (rng.choice(["yes", "no", "maybe", ""]), rng.choice(["yes", "no", "maybe", ""]))
            for _ in range(n)
        ]
        s = valse_score(replies)
        # independent counter simulation
        cf = sum(1 for r1, _ in replies if r1 == "yes")
        fd = sum(1 for _, r2 in replies if r2 == "no")
        pw = sum(1 for r1, r2 in replies if r1 == "yes" and r2 == "no")
        ok &= s.p_c == cf / n * 100.0
        ok &= s.p_f == fd / n * 100.0
        ok &= s.acc == (cf + fd) / n * 50.0
        ok &= s.acc_r == pw / n * 100.0
        ok &= abs(s.acc - (s.p_c + s.p_f) / 2) < 1e-12
        ok &= s.acc_r <= min(s.p_c, s.p_f) + 1e-12
        if not ok:
            break
    report("caption/foil scorer equals brute-force counters on 1000 random sets", ok)


def test_criterion_threshold_properties():
    rng = random.Random(99)
    ok = True
    for _ in range(10_000):
        dets = random_detections(rng, rng.randint(0, 8))
        a = rng.uniform(0, 1)
        b = rng.uniform(a, 1)
        kept_a = filter_by_confidence(dets, a)
        kept_b = filter_by_confidence(dets, b)
        ok &= all(d in kept_a for d in kept_b)  # monotone
    # strict boundary behavior
    box = NormBox(0.5, 0.5, 0.1, 0.1)
    eps = 1e-9
    for cutoff in (0.0, 0.3, 0.6, 0.9):
        at = Detection("x", box, cutoff)
        above = Detection("x", box, min(1.0, cutoff + eps))
        ok &= filter_by_confidence([at], cutoff) == []
        ok &= filter_by_confidence([above], cutoff) == [above]
    report("confidence filtering monotone and strict at the boundary", ok)


def test_criterion_compression_property():
    rng = random.Random(77)
    ok = True
    for _ in range(1000):
        dets = random_detections(rng, rng.randint(1, 30))
        compact = build_od_sentence(dets, Thresholds(od_conf=0.0))
        ok &= compact.token_len < scan_tokens(ungrouped_box_sentence(dets))
        if not ok:
            break
    report("grouped sentence strictly shorter than 4-coordinate variant", ok)


def test_criterion_end_to_end_mock_run(tmp_path):
    det_lines, bench_lines = make_synthetic_corpus(200, seed=42)
    dets = tmp_path / "dets.jsonl"
    dets.write_text("\n".join(det_lines))
    bench = tmp_path / "bench.jsonl"
    bench.write_text("\n".join(bench_lines))
    inf = tmp_path / "inf.jsonl"
    assert main(["build-text", "--od", str(dets), "--out", str(inf)]) == EXIT_OK

    def run_and_score(mode: str, parallel: int) -> float:
        store = tmp_path / f"store-{mode}-{parallel}.jsonl"
        rep = tmp_path / f"report-{mode}-{parallel}.json"
        assert main(
            [
                "run", "--bench", str(bench), "--infusions", str(inf),
                "--store", str(store), "--mode", mode, "--mock",
                "--parallel", str(parallel),
            ]
        ) == EXIT_OK
        assert main(
            ["score", "--bench", str(bench), "--store", str(store), "--out", str(rep)]
        ) == EXIT_OK
        return json.loads(rep.read_text())["metrics"]["accuracy"]

    infused_1 = run_and_score("infused", 1)
    infused_8 = run_and_score("infused", 8)
    plain = run_and_score("plain", 1)
    store_1 = (tmp_path / "store-infused-1.jsonl").read_text()
    store_8 = (tmp_path / "store-infused-8.jsonl").read_text()
    ok = infused_1 == 100.0 and infused_8 == 100.0 and plain <= 55.0 and store_1 == store_8
    report(
        f"end-to-end mock run (infused {infused_1}%, plain {plain}%, parallel-deterministic)", ok
    )


def test_criterion_gqa_star_filter():
    rng = random.Random(5)
    samples = []
    for i in range(100):
        kind = rng.randrange(4)
        if kind == 0:
            samples.append(BenchSample(f"s{i}", "i", "Is it red?", rng.choice(["yes", "no"]), "binary"))
        elif kind == 1:
            samples.append(BenchSample(f"s{i}", "i", "Left or right of the door?", "left", "choice"))
        elif kind == 2:
            samples.append(BenchSample(f"s{i}", "i", "What color is the floor?", "red", "open"))
        else:
            samples.append(BenchSample(f"s{i}", "i", "Who is in the corridor?", "man", "open"))
    kept = gqa_star_filter(samples)
    brute = [
        s
        for s in samples
        if s.answer.lower().strip(".") in ("yes", "no")
        or re.search(r"(?i)\bor\b", s.question)
    ]
    ok = kept == brute and gqa_star_filter(kept) == kept
    report("unambiguous-subset filter equals brute force and is idempotent", ok)


def test_criterion_budget_rule():
    rng = random.Random(3)
    ok = True
    for i in range(500):
        # boundary-constructed sentence with an exactly known oracle count
        target = 1024 if i % 2 == 0 else 1025
        words = " ".join("w" for _ in range(target))
        assert scan_tokens(words) == target
        t = InfusionText("od", words, token_len=scan_tokens(words))
        out = apply_budget(t, 1024)
        ok &= out.dropped == (target > 1024)
        ok &= (out.sentence == "") == (target > 1024)
    report("token budget drops >1024 and keeps =1024", ok)
