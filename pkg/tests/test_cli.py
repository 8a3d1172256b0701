import json

import pytest

from detinfuse.cli import EXIT_EMPTY, EXIT_OK, EXIT_VALIDATION, main
from detinfuse.geometry import Thresholds
from detinfuse.ingest import parse_detection_file
from detinfuse.textgen import apply_budget, build_od_sentence
from synth import make_synthetic_corpus

PAPER_OD = (
    "Here are the central coordinates of certain objects in this image: "
    "2 people:{[0.25, 0.12], [0.11, 0.43]}, 1 cake:{[0.42, 0.32]}."
)
PAPER_OCR = (
    "Here are the central coordinates of certain texts in this image: "
    "'Birthday'[0.41, 0.85], 'YEARS'[0.11, 0.34]."
)


@pytest.fixture
def paper_inputs(tmp_path):
    od = tmp_path / "od.json"
    od.write_text(
        json.dumps(
            {
                "image_id": "img1",
                "detections": [
                    {"label": "person", "box": [0.25, 0.12, 0.1, 0.1], "confidence": 0.8},
                    {"label": "person", "box": [0.11, 0.43, 0.1, 0.1], "confidence": 0.7},
                    {"label": "cake", "box": [0.42, 0.32, 0.1, 0.1], "confidence": 0.9},
                ],
            }
        )
    )
    ocr = tmp_path / "ocr.json"
    ocr.write_text(
        json.dumps(
            {
                "image_id": "img1",
                "spans": [
                    {"text": "Birthday", "region": [0.41, 0.85, 0.1, 0.05], "confidence": 0.95},
                    {"text": "YEARS", "region": [0.11, 0.34, 0.1, 0.05], "confidence": 0.9},
                ],
            }
        )
    )
    return od, ocr


class TestBuildText:
    def test_paper_sentences(self, tmp_path, paper_inputs):
        od, ocr = paper_inputs
        out = tmp_path / "inf.jsonl"
        assert main(["build-text", "--od", str(od), "--ocr", str(ocr), "--out", str(out)]) == EXIT_OK
        row = json.loads(out.read_text())
        assert row["od_sentence"] == PAPER_OD
        assert row["ocr_sentence"] == PAPER_OCR
        assert not row["od_dropped"]

    def test_empty_inputs(self, tmp_path):
        od = tmp_path / "od.json"
        od.write_text(json.dumps({"image_id": "i", "detections": []}))
        out = tmp_path / "inf.jsonl"
        assert main(["build-text", "--od", str(od), "--out", str(out)]) == EXIT_OK
        row = json.loads(out.read_text())
        assert row["od_sentence"] == "" and row["od_token_len"] == 0

    def test_missing_inputs_is_empty_error(self, tmp_path):
        assert main(["build-text", "--out", str(tmp_path / "x")]) == EXIT_EMPTY

    def test_matches_library_calls(self, tmp_path):
        det_lines, _ = make_synthetic_corpus(60, seed=5)
        src = tmp_path / "dets.jsonl"
        src.write_text("\n".join(det_lines))
        out = tmp_path / "inf.jsonl"
        assert main(["build-text", "--od", str(src), "--out", str(out)]) == EXIT_OK
        rows = {json.loads(l)["image_id"]: json.loads(l) for l in out.read_text().splitlines()}
        for line in det_lines:
            f = parse_detection_file(line)
            expect = apply_budget(build_od_sentence(f.detections, Thresholds()))
            assert rows[f.image_id]["od_sentence"] == expect.sentence
            assert rows[f.image_id]["od_token_len"] == expect.token_len

    def test_bad_file_is_validation_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["build-text", "--od", str(bad), "--out", str(tmp_path / "o")]) == EXIT_VALIDATION


class TestStats:
    def test_prints_per_modality(self, tmp_path, capsys):
        inf = tmp_path / "inf.jsonl"
        rows = [
            {"image_id": "a", "od_token_len": 0, "ocr_token_len": 10},
            {"image_id": "b", "od_token_len": 10, "ocr_token_len": 20},
            {"image_id": "c", "od_token_len": 20, "ocr_token_len": 600},
        ]
        inf.write_text("\n".join(json.dumps(r) for r in rows))
        assert main(["stats", "--infusions", str(inf)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "od: mean=10.0 mean_nonzero=15.0" in out
        assert "frac>512=0.3333" in out


class TestGqaStar:
    def test_filter_and_count(self, tmp_path, capsys):
        bench = tmp_path / "bench.jsonl"
        samples = [
            {"sample_id": "a", "image_ref": "i", "question": "Is it red?", "answer": "yes", "answer_type": "binary"},
            {"sample_id": "b", "image_ref": "i", "question": "Left or right?", "answer": "left", "answer_type": "choice"},
            {"sample_id": "c", "image_ref": "i", "question": "What color?", "answer": "red", "answer_type": "open"},
        ]
        bench.write_text("\n".join(json.dumps(s) for s in samples))
        out = tmp_path / "out.jsonl"
        assert main(["gqa-star", "--bench", str(bench), "--out", str(out)]) == EXIT_OK
        kept = [json.loads(l)["sample_id"] for l in out.read_text().splitlines()]
        assert kept == ["a", "b"]
        assert "retained 2 of 3" in capsys.readouterr().out

    def test_empty_bench(self, tmp_path):
        bench = tmp_path / "bench.jsonl"
        bench.write_text("")
        assert main(["gqa-star", "--bench", str(bench), "--out", str(tmp_path / "o")]) == EXIT_EMPTY


class TestRunAndScore:
    def _pipeline(self, tmp_path, mode: str, parallel: int = 1, n: int = 40):
        det_lines, bench_lines = make_synthetic_corpus(n, seed=9)
        dets = tmp_path / "dets.jsonl"
        dets.write_text("\n".join(det_lines))
        bench = tmp_path / "bench.jsonl"
        bench.write_text("\n".join(bench_lines))
        inf = tmp_path / "inf.jsonl"
        assert main(["build-text", "--od", str(dets), "--out", str(inf)]) == EXIT_OK
        store = tmp_path / f"store-{mode}-{parallel}.jsonl"
        assert (
            main(
                [
                    "run",
                    "--bench", str(bench),
                    "--infusions", str(inf),
                    "--store", str(store),
                    "--mode", mode,
                    "--mock",
                    "--parallel", str(parallel),
                ]
            )
            == EXIT_OK
        )
        report = tmp_path / f"report-{mode}-{parallel}.json"
        assert (
            main(["score", "--bench", str(bench), "--store", str(store), "--out", str(report)])
            == EXIT_OK
        )
        return json.loads(report.read_text())["metrics"]["accuracy"], store

    def test_infused_scores_perfect(self, tmp_path):
        acc, _ = self._pipeline(tmp_path, "infused")
        assert acc == 100.0

    def test_plain_scores_low(self, tmp_path):
        acc, _ = self._pipeline(tmp_path, "plain")
        assert acc <= 55.0

    def test_deterministic_across_parallelism(self, tmp_path):
        acc1, store1 = self._pipeline(tmp_path, "infused", parallel=1)
        acc8, store8 = self._pipeline(tmp_path, "infused", parallel=8)
        assert acc1 == acc8
        assert store1.read_text() == store8.read_text()


class TestDelta:
    def test_delta_between_reports(self, tmp_path, capsys):
        base = tmp_path / "base.json"
        cand = tmp_path / "cand.json"
        base.write_text(json.dumps({"metrics": {"a": 50.0, "b": 100.0}}))
        cand.write_text(json.dumps({"metrics": {"a": 55.0, "b": 110.0}}))
        assert main(["delta", str(base), str(cand)]) == EXIT_OK
        assert "+10.00%" in capsys.readouterr().out


class TestValseScoreCommand:
    def test_valse_pipeline(self, tmp_path, capsys):
        valse = tmp_path / "valse.jsonl"
        valse.write_text(
            "\n".join(
                json.dumps(
                    {"instance_id": f"v{i}", "image_ref": "img", "caption": "a dog", "foil": "a cat"}
                )
                for i in range(2)
            )
        )
        store = tmp_path / "store.jsonl"
        records = []
        for i, (r1, r2) in enumerate([("yes", "no"), ("no", "no")]):
            for suffix, reply in (("q1", r1), ("q2", r2)):
                records.append(
                    json.dumps(
                        {
                            "sample_id": f"v{i}#{suffix}",
                            "config_fingerprint": "f",
                            "prompt": "p",
                            "response": reply,
                            "latency_ms": 0.0,
                            "timestamp": 0.0,
                            "error": None,
                        }
                    )
                )
        store.write_text("\n".join(records))
        assert main(["score", "--store", str(store), "--valse", str(valse)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "75.00" in out  # acc for (yes,no),(no,no)
