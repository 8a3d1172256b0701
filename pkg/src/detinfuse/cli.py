"""Command-line surface: build-text, stats, gqa-star, run, score, delta.

Configuration comes from an optional JSON config file; command-line flags
win over config values. Exit codes: 0 success, 2 validation error,
3 endpoint failure, 4 empty input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import (
    ConfigError,
    EmptyInputError,
    EndpointError,
    GeometryError,
    ParseError,
    ToolkitError,
    ValidationError,
)
from .geometry import Thresholds
from .ingest import iter_stream, parse_detection_file, parse_ocr_file
from .runner import (
    ChatEndpoint,
    EndpointConfig,
    MockEndpoint,
    PromptBundle,
    RunStore,
    config_fingerprint,
    run_batch,
)
from .scoring import (
    BenchSample,
    ScoreReport,
    ValseInstance,
    build_valse_questions,
    delta as compute_delta,
    gqa_star_filter,
    score_exact,
    valse_score,
)
from .textgen import (
    DEFAULT_BUDGET,
    InfusionText,
    TokenizerSpec,
    apply_budget,
    build_od_sentence,
    build_ocr_sentence,
    corpus_stats,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ENDPOINT = 3
EXIT_EMPTY = 4


@dataclass
class Config:
    thresholds: Thresholds = field(default_factory=Thresholds)
    tokenizer: TokenizerSpec = field(default_factory=TokenizerSpec)
    budget: int = DEFAULT_BUDGET
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    mode: str = "infused"
    detector_kind: str = "closed"

    @staticmethod
    def load(path: Optional[str]) -> "Config":
        cfg = Config()
        if not path:
            return cfg
        try:
            with open(path, encoding="utf-8") as f:
                doc = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if "thresholds" in doc:
            cfg.thresholds = Thresholds(**doc["thresholds"])
        if "tokenizer" in doc:
            cfg.tokenizer = TokenizerSpec(**doc["tokenizer"])
        if "endpoint" in doc:
            cfg.endpoint = EndpointConfig(**doc["endpoint"])
        cfg.budget = doc.get("budget", cfg.budget)
        cfg.mode = doc.get("mode", cfg.mode)
        cfg.detector_kind = doc.get("detector_kind", cfg.detector_kind)
        if cfg.budget <= 0:
            raise ConfigError("budget must be positive")
        return cfg


def _require_path(path: Optional[str], what: str) -> str:
    if not path:
        raise ConfigError(f"missing required path: {what}")
    if not os.path.exists(path):
        raise ConfigError(f"{what} does not exist: {path}")
    return path


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def _load_stream_or_doc(path: str) -> List[dict]:
    """Accept either a corpus stream (one doc per line) or a single JSON doc."""
    text = _read(path)
    stripped = text.lstrip()
    if stripped.startswith("{") and "\n" in stripped.rstrip():
        try:
            return list(iter_stream(text))
        except ParseError:
            pass
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    return doc if isinstance(doc, list) else [doc]


def _load_bench(path: str) -> List[BenchSample]:
    samples = []
    for i, doc in enumerate(iter_stream(_read(path))):
        try:
            samples.append(
                BenchSample(
                    sample_id=doc["sample_id"],
                    image_ref=doc["image_ref"],
                    question=doc["question"],
                    answer=doc["answer"],
                    answer_type=doc.get("answer_type", "open"),
                )
            )
        except KeyError as e:
            raise ValidationError(f"benchmark record {i}: missing field {e}") from e
    return samples


def _load_infusions(path: str) -> Dict[str, dict]:
    return {doc["image_id"]: doc for doc in iter_stream(_read(path))}


def _infusion_from_row(row: dict, modality: str) -> Optional[InfusionText]:
    sentence = row.get(f"{modality}_sentence", "")
    dropped = row.get(f"{modality}_dropped", False)
    if dropped or not sentence:
        return None
    return InfusionText(
        modality=modality,
        sentence=sentence,
        token_len=row.get(f"{modality}_token_len", 0),
        dropped=False,
    )


def cmd_build_text(args, cfg: Config) -> int:
    od_files = {}
    ocr_files = {}
    if args.od:
        for doc in _load_stream_or_doc(_require_path(args.od, "--od")):
            f = parse_detection_file(doc)
            od_files[f.image_id] = f
    if args.ocr:
        for doc in _load_stream_or_doc(_require_path(args.ocr, "--ocr")):
            f = parse_ocr_file(doc)
            ocr_files[f.image_id] = f
    if not od_files and not ocr_files:
        raise EmptyInputError("build-text needs --od and/or --ocr input")

    image_ids = list(od_files)
    image_ids += [k for k in ocr_files if k not in od_files]
    rows = []
    for image_id in image_ids:
        od = build_od_sentence(
            od_files[image_id].detections if image_id in od_files else [],
            cfg.thresholds,
            cfg.tokenizer,
        )
        ocr = build_ocr_sentence(
            ocr_files[image_id].spans if image_id in ocr_files else [],
            cfg.thresholds,
            cfg.tokenizer,
        )
        od = apply_budget(od, cfg.budget)
        ocr = apply_budget(ocr, cfg.budget)
        rows.append(
            {
                "image_id": image_id,
                "od_sentence": od.sentence,
                "ocr_sentence": ocr.sentence,
                "od_token_len": od.token_len,
                "ocr_token_len": ocr.token_len,
                "od_dropped": od.dropped,
                "ocr_dropped": ocr.dropped,
            }
        )
    with open(args.out, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"wrote {len(rows)} infusion rows to {args.out}")
    return EXIT_OK


def cmd_stats(args, cfg: Config) -> int:
    rows = list(iter_stream(_read(_require_path(args.infusions, "--infusions"))))
    if not rows:
        raise EmptyInputError("no infusion rows")
    for modality in ("od", "ocr"):
        stats = corpus_stats([row.get(f"{modality}_token_len", 0) for row in rows])
        print(
            f"{modality}: mean={stats.mean_len:.1f} "
            f"mean_nonzero={stats.mean_len_nonzero:.1f} "
            f"frac>512={stats.frac_over(512):.4f} "
            f"frac>1024={stats.frac_over(1024):.4f}"
        )
    return EXIT_OK


def cmd_gqa_star(args, cfg: Config) -> int:
    samples = _load_bench(_require_path(args.bench, "--bench"))
    if not samples:
        raise EmptyInputError("benchmark file is empty")
    kept = gqa_star_filter(samples)
    with open(args.out, "w", encoding="utf-8") as f:
        for s in kept:
            f.write(
                json.dumps(
                    {
                        "sample_id": s.sample_id,
                        "image_ref": s.image_ref,
                        "question": s.question,
                        "answer": s.answer,
                        "answer_type": s.answer_type,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"retained {len(kept)} of {len(samples)} samples -> {args.out}")
    return EXIT_OK


def _make_bundles(args, cfg: Config) -> List[PromptBundle]:
    samples = _load_bench(_require_path(args.bench, "--bench"))
    if not samples:
        raise EmptyInputError("benchmark file is empty")
    infusions = {}
    if cfg.mode == "infused":
        infusions = _load_infusions(_require_path(args.infusions, "--infusions"))
    bundles = []
    for s in samples:
        row = infusions.get(s.image_ref, {})
        od = _infusion_from_row(row, "od") if cfg.mode == "infused" else None
        ocr = _infusion_from_row(row, "ocr") if cfg.mode == "infused" else None
        bundles.append(
            PromptBundle(
                sample_id=s.sample_id,
                image_ref=s.image_ref,
                question=s.question,
                mode=cfg.mode if (od or ocr) else "plain",
                od_text=od,
                ocr_text=ocr,
            )
        )
    return bundles


def cmd_run(args, cfg: Config) -> int:
    bundles = _make_bundles(args, cfg)
    store = RunStore(args.store)
    endpoint = MockEndpoint() if args.mock else ChatEndpoint(cfg.endpoint)
    model = "mock" if args.mock else cfg.endpoint.model
    fp = config_fingerprint(cfg.thresholds, cfg.mode, model, cfg.budget)
    records = run_batch(bundles, endpoint, store, cfg.endpoint, fp)
    failures = sum(1 for r in records if r.error)
    print(f"completed {len(records)} samples ({failures} failures) -> {args.store}")
    return EXIT_OK


def cmd_score(args, cfg: Config) -> int:
    store = RunStore(_require_path(args.store, "--store"))
    replies = {r.sample_id: r.response for r in store.records() if r.error is None}
    report = ScoreReport()
    if args.valse:
        instances = [
            ValseInstance(
                instance_id=doc["instance_id"],
                image_ref=doc["image_ref"],
                caption=doc["caption"],
                foil=doc["foil"],
            )
            for doc in iter_stream(_read(_require_path(args.valse, "--valse")))
        ]
        if not instances:
            raise EmptyInputError("no VALSE instances")
        pairs = [
            (replies.get(f"{i.instance_id}#q1", ""), replies.get(f"{i.instance_id}#q2", ""))
            for i in instances
        ]
        scores = valse_score(pairs)
        report.metrics = {
            "acc_r": scores.acc_r,
            "acc": scores.acc,
            "p_c": scores.p_c,
            "p_f": scores.p_f,
        }
    else:
        samples = _load_bench(_require_path(args.bench, "--bench"))
        pairs = [(s, replies.get(s.sample_id, "")) for s in samples]
        report.metrics = {args.name: score_exact(pairs)}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
    print(report.format_table())
    return EXIT_OK


def cmd_delta(args, cfg: Config) -> int:
    def load_metrics(path: str) -> Dict[str, float]:
        with open(_require_path(path, "report"), encoding="utf-8") as f:
            return json.load(f)["metrics"]

    d = compute_delta(load_metrics(args.baseline), load_metrics(args.candidate))
    print(f"delta: {d:+.2f}%")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="detinfuse",
        description="Textual detection infusion and benchmark scoring toolkit",
    )
    p.add_argument("--config", help="JSON config file; flags override it")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-text", help="render infusion sentences from detector/OCR files")
    b.add_argument("--od", help="detection file or stream")
    b.add_argument("--ocr", help="OCR file or stream")
    b.add_argument("--out", required=True)
    b.add_argument("--budget", type=int)
    b.add_argument("--od-conf", type=float)
    b.add_argument("--ocr-conf", type=float)
    b.set_defaults(func=cmd_build_text)

    s = sub.add_parser("stats", help="corpus token-length statistics")
    s.add_argument("--infusions", required=True)
    s.set_defaults(func=cmd_stats)

    g = sub.add_parser("gqa-star", help="filter a benchmark to its unambiguous subset")
    g.add_argument("--bench", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gqa_star)

    r = sub.add_parser("run", help="run batch inference over assembled prompts")
    r.add_argument("--bench", required=True)
    r.add_argument("--infusions")
    r.add_argument("--store", required=True)
    r.add_argument("--mode", choices=["infused", "plain"])
    r.add_argument("--mock", action="store_true")
    r.add_argument("--parallel", type=int)
    r.add_argument("--budget", type=int)
    r.add_argument("--od-conf", type=float)
    r.add_argument("--ocr-conf", type=float)
    r.add_argument("--base-url")
    r.add_argument("--model")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("score", help="score a run store against a benchmark")
    c.add_argument("--bench")
    c.add_argument("--store", required=True)
    c.add_argument("--valse", help="VALSE instance file; scores reply pairs instead")
    c.add_argument("--name", default="accuracy", help="metric name in the report")
    c.add_argument("--out", help="write the report as JSON")
    c.set_defaults(func=cmd_score)

    d = sub.add_parser("delta", help="aggregate improvement between two reports")
    d.add_argument("baseline")
    d.add_argument("candidate")
    d.set_defaults(func=cmd_delta)
    return p


def _apply_overrides(args, cfg: Config) -> Config:
    th = cfg.thresholds
    if getattr(args, "od_conf", None) is not None:
        th = Thresholds(args.od_conf, th.ocr_box, th.openset_box, th.openset_text)
    if getattr(args, "ocr_conf", None) is not None:
        th = Thresholds(th.od_conf, args.ocr_conf, th.openset_box, th.openset_text)
    cfg.thresholds = th
    if getattr(args, "budget", None) is not None:
        if args.budget <= 0:
            raise ConfigError("budget must be positive")
        cfg.budget = args.budget
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    ep = cfg.endpoint
    updates = {}
    if getattr(args, "parallel", None) is not None:
        updates["parallel"] = args.parallel
    if getattr(args, "base_url", None):
        updates["base_url"] = args.base_url
    if getattr(args, "model", None):
        updates["model"] = args.model
    if updates:
        cfg.endpoint = EndpointConfig(
            base_url=updates.get("base_url", ep.base_url),
            model=updates.get("model", ep.model),
            timeout=ep.timeout,
            parallel=updates.get("parallel", ep.parallel),
            retries=ep.retries,
            consecutive_failure_limit=ep.consecutive_failure_limit,
        )
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(args, Config.load(args.config))
        return args.func(args, cfg)
    except EmptyInputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except EndpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (ValidationError, ParseError, GeometryError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ToolkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
