"""Command-line front end.

Stage-per-subcommand so external SR models can be slotted in between
degradation and recognition:

    platesr synth      render a seeded synthetic corpus
    platesr ingest     build a manifest from annotated real images
    platesr degrade    generate LR images from a preset or config
    platesr upscale    restore LR images (bilinear/bicubic/generator/external)
    platesr recognize  read plate strings (builtin or external adapter)
    platesr evaluate   score one model into JSON/CSV/SVG reports
    platesr compare    run several upscalers and rank them

Every artifact carries a provenance block (tool version, config hash,
seed); timestamps live in a separate field excluded from hashing, so
identical configs reproduce identical artifacts modulo that field.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import shlex
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, dataset, metrics, ocr, srnet
from .degrade import PRESETS, DegradationConfig
from .errors import (
    AdapterError,
    InvalidArgumentError,
    ManifestError,
    PlateSRError,
    UndefinedMetricError,
    WeightSchemaError,
)
from .imgcore import ImageF32, read_png, resize, write_png

_VALIDATION_ERRORS = (
    InvalidArgumentError,
    ManifestError,
    UndefinedMetricError,
    WeightSchemaError,
    FileNotFoundError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract wants 1 for validation.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._validation_exit(message))

    def _validation_exit(self, message) -> int:
        print(f"error: {message}", file=sys.stderr)
        return 1


def _provenance(config: dict, seed: int | None) -> dict:
    canon = json.dumps(config, sort_keys=True)
    return {
        "tool_version": __version__,
        "config_hash": hashlib.sha256(canon.encode()).hexdigest()[:16],
        "seed": seed,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _degradation_config(args) -> DegradationConfig:
    if getattr(args, "config", None):
        cfg = DegradationConfig.from_json(Path(args.config).read_text())
    elif getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise InvalidArgumentError(
                f"unknown preset {args.preset!r}, expected one of {sorted(PRESETS)}"
            )
        cfg = PRESETS[args.preset]
    else:
        raise InvalidArgumentError("degrade needs --preset or --config")
    overrides = {}
    if getattr(args, "scale", None) is not None:
        overrides["scale_factor"] = args.scale
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        raw = json.loads(cfg.to_json())
        raw.update(overrides)
        cfg = DegradationConfig.from_json(json.dumps(raw))
    return cfg


# ---------------------------------------------------------------------------
# Upscalers
# ---------------------------------------------------------------------------


def _interp_upscaler(filter_name):
    def fn(lr: ImageF32, target_w: int, target_h: int) -> ImageF32:
        return resize(lr, target_w, target_h, filter_name).clamped()

    return fn


def _generator_upscaler(weights_path):
    store = srnet.load_weights(weights_path)
    cfg = srnet.GeneratorConfig.from_dict(store.config)

    def fn(lr: ImageF32, target_w: int, target_h: int) -> ImageF32:
        out = srnet.generator_forward(lr, store, cfg)
        if (out.width, out.height) != (target_w, target_h):
            out = resize(out, target_w, target_h, "bicubic").clamped()
        return out

    return fn


def _external_upscaler(command: str):
    argv_template = shlex.split(command)
    if not any("{in}" in a for a in argv_template) or not any(
        "{out}" in a for a in argv_template
    ):
        raise InvalidArgumentError(
            "external upscaler command must contain {in} and {out} placeholders"
        )

    def fn(lr: ImageF32, target_w: int, target_h: int) -> ImageF32:
        with tempfile.TemporaryDirectory(prefix="platesr-up-") as d:
            pin = str(Path(d) / "in.png")
            pout = str(Path(d) / "out.png")
            write_png(lr.clamped(), pin)
            argv = [a.replace("{in}", pin).replace("{out}", pout) for a in argv_template]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=120)
            except FileNotFoundError as exc:
                raise AdapterError(f"upscaler spawn failed: {exc}")
            except subprocess.TimeoutExpired:
                raise AdapterError("external upscaler timed out")
            if proc.returncode != 0:
                raise AdapterError(
                    f"external upscaler exited {proc.returncode}", stderr=proc.stderr
                )
            out = read_png(pout)
        if (out.width, out.height) != (target_w, target_h):
            out = resize(out, target_w, target_h, "bicubic").clamped()
        return out

    return fn


def _build_upscaler(name: str, weights: str | None, adapter_cmd: str | None):
    """Returns (model_id, fn(lr, tw, th) -> ImageF32, flags)."""
    if name in ("bilinear", "bicubic"):
        return name, _interp_upscaler(name), {}
    if name == "generator":
        if not weights:
            raise InvalidArgumentError("--weights is required for the generator upscaler")
        store = srnet.load_weights(weights)
        model_id = f"generator-{Path(weights).stem}"
        flags = {}
        if store.config.get("scale", 4) != 4:
            flags["approx_scale"] = True
        return model_id, _generator_upscaler(weights), flags
    if name == "external":
        if not adapter_cmd:
            raise InvalidArgumentError("--adapter-cmd is required for external upscalers")
        digest = hashlib.sha256(adapter_cmd.encode()).hexdigest()[:8]
        return f"external-{digest}", _external_upscaler(adapter_cmd), {}
    raise InvalidArgumentError(f"unknown upscaler {name!r}")


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    _require(args, "out", "n")
    seed = args.seed if args.seed is not None else 0
    out = Path(args.out)
    manifest = dataset.synth_plates(args.n, seed, out, render_scale=args.render_scale)
    manifest.save(out / "manifest.json")
    prov = _provenance({"cmd": "synth", "n": args.n, "render_scale": args.render_scale}, seed)
    _write_json(out / "synth.provenance.json", {"provenance": prov})
    print(f"wrote {len(manifest.records)} plates under {out}")
    return 0


def cmd_ingest(args) -> int:
    manifest, errors = dataset.ingest(args.root, args.annotations)
    for e in errors:
        print(f"annotation line {e.line}: {e.message}", file=sys.stderr)
    out = Path(args.out or args.root)
    out.mkdir(parents=True, exist_ok=True)
    manifest.save(out / "manifest.json")
    print(f"ingested {len(manifest.records)} records ({len(errors)} errors)")
    return 0


def cmd_degrade(args) -> int:
    _require(args, "manifest")
    cfg = _degradation_config(args)
    root = Path(args.manifest).parent
    manifest = dataset.Manifest.load(args.manifest)
    manifest = dataset.make_lr_pairs(manifest, cfg, root, jobs=args.jobs)
    manifest.save(args.manifest)
    prov = _provenance({"cmd": "degrade", "config": json.loads(cfg.to_json())}, cfg.seed)
    _write_json(root / "degrade.provenance.json", {"provenance": prov})
    print(f"degraded {len(manifest.records)} records (scale {cfg.scale_factor})")
    return 0


def _run_upscale(manifest: dataset.Manifest, root: Path, out: Path, model_id, fn, flags, jobs):
    sr_dir = out / "sr" / model_id
    sr_dir.mkdir(parents=True, exist_ok=True)

    def process(rec):
        if not rec.lr_path:
            raise ManifestError(f"record {rec.id} has no lr_path; run degrade first")
        lr = read_png(root / rec.lr_path)
        hr = read_png(root / rec.hr_path)
        sr = fn(lr, hr.width, hr.height)
        rel = f"sr/{model_id}/{rec.id}.png"
        write_png(sr, out / rel)
        return {"id": rec.id, "sr_path": rel}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(process, manifest.records))
    else:
        entries = [process(r) for r in manifest.records]
    return entries


def cmd_upscale(args) -> int:
    _require(args, "manifest", "upscaler")
    manifest = dataset.Manifest.load(args.manifest)
    root = Path(args.manifest).parent
    out = Path(args.out or root)
    model_id, fn, flags = _build_upscaler(args.upscaler, args.weights, args.adapter_cmd)
    entries = _run_upscale(manifest, root, out, model_id, fn, flags, args.jobs)
    doc = {
        "model_id": model_id,
        "upscaler": args.upscaler,
        "flags": flags,
        "records": entries,
        "provenance": _provenance(
            {"cmd": "upscale", "upscaler": args.upscaler, "weights": args.weights},
            manifest.seed,
        ),
    }
    _write_json(out / "sr" / f"{model_id}.json", doc)
    print(f"upscaled {len(entries)} records with {model_id}")
    return 0


def _build_recognizer(name: str, adapter_cmd: str | None):
    if name == "builtin":
        return lambda img: ocr.recognize_builtin(img)
    if name == "external":
        if not adapter_cmd:
            raise InvalidArgumentError("--adapter-cmd is required for external recognizers")
        return lambda img: ocr.recognize_external(img, adapter_cmd)
    raise InvalidArgumentError(f"unknown recognizer {name!r}")


def _run_recognize(entries, base: Path, recognize_fn, jobs):
    def process(entry):
        img = read_png(base / entry["sr_path"])
        ps = recognize_fn(img)
        return {
            "id": entry["id"],
            "pred": ps.text,
            "raw": ps.raw,
            "confidence": ps.confidence,
            "pattern": ps.matched_pattern,
        }

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(process, entries))
    return [process(e) for e in entries]


def cmd_recognize(args) -> int:
    _require(args, "sr")
    sr_doc = json.loads(Path(args.sr).read_text())
    base = Path(args.sr).parent.parent
    recognize_fn = _build_recognizer(args.recognizer, args.adapter_cmd)
    results = _run_recognize(sr_doc["records"], base, recognize_fn, args.jobs)
    doc = {
        "model_id": sr_doc["model_id"],
        "recognizer": args.recognizer,
        "results": results,
        "provenance": _provenance(
            {"cmd": "recognize", "recognizer": args.recognizer, "model": sr_doc["model_id"]},
            None,
        ),
    }
    out = Path(args.out or Path(args.sr).with_suffix(".recognition.json"))
    _write_json(out, doc)
    print(f"recognized {len(results)} plates ({sr_doc['model_id']}, {args.recognizer})")
    return 0


def _evaluate_model(manifest, root: Path, sr_doc, rec_doc, base: Path, out_dir: Path, formats):
    sr_by_id = {e["id"]: e["sr_path"] for e in sr_doc["records"]}
    pred_by_id = {r["id"]: r["pred"] for r in rec_doc["results"]}

    rows = []
    for rec in manifest.records:
        if rec.id not in sr_by_id or rec.id not in pred_by_id:
            continue
        hr = read_png(root / rec.hr_path).clamped()
        sr = read_png(base / sr_by_id[rec.id]).clamped()
        if (sr.width, sr.height) != (hr.width, hr.height):
            sr = resize(sr, hr.width, hr.height, "bicubic").clamped()
        rows.append(
            metrics.EvalRow(
                id=rec.id,
                psnr_db=metrics.psnr(hr, sr),
                ssim=metrics.ssim(hr, sr),
                pred=pred_by_id[rec.id],
                truth=rec.truth,
            )
        )
    provenance = _provenance(
        {
            "cmd": "evaluate",
            "model": sr_doc["model_id"],
            "degradation": manifest.records[0].degradation if manifest.records else None,
            "flags": sr_doc.get("flags", {}),
        },
        manifest.seed,
    )
    report = metrics.build_report(rows, sr_doc["model_id"], provenance)
    stem = out_dir / f"report-{report.model_id}"
    out_dir.mkdir(parents=True, exist_ok=True)
    if "json" in formats:
        Path(f"{stem}.json").write_text(metrics.report_to_json(report) + "\n")
    if "csv" in formats:
        Path(f"{stem}.csv").write_text(metrics.report_to_csv(report))
    if "svg" in formats:
        Path(f"{stem}.svg").write_text(metrics.comparison_svg([report]))
    return report


def cmd_evaluate(args) -> int:
    _require(args, "manifest", "sr", "recognition")
    manifest = dataset.Manifest.load(args.manifest)
    root = Path(args.manifest).parent
    sr_doc = json.loads(Path(args.sr).read_text())
    rec_doc = json.loads(Path(args.recognition).read_text())
    formats = set(args.report_format.split(","))
    out_dir = Path(args.out or root / "reports")
    sr_base = Path(args.sr).parent.parent
    report = _evaluate_model(manifest, root, sr_doc, rec_doc, sr_base, out_dir, formats)
    s = report.summary
    print(
        f"{report.model_id}: exact={s['exact_match_rate']:.3f} "
        f"char_acc={s['char_accuracy']:.3f} "
        f"psnr={s['psnr_mean_db'] if s['psnr_mean_db'] is None else round(s['psnr_mean_db'], 2)} "
        f"ssim={s['ssim_mean']:.4f}"
    )
    return 0


def cmd_compare(args) -> int:
    _require(args, "manifest", "upscalers")
    manifest = dataset.Manifest.load(args.manifest)
    root = Path(args.manifest).parent
    out = Path(args.out or root)
    specs = [s.strip() for s in args.upscalers.split(",") if s.strip()]
    if len(specs) < 2:
        raise InvalidArgumentError("compare needs at least two upscalers")
    recognize_fn = _build_recognizer(args.recognizer, args.adapter_cmd)
    formats = set(args.report_format.split(","))

    reports = []
    for spec in specs:
        model_id, fn, flags = _build_upscaler(spec, args.weights, args.adapter_cmd)
        entries = _run_upscale(manifest, root, out, model_id, fn, flags, args.jobs)
        sr_doc = {"model_id": model_id, "upscaler": spec, "flags": flags, "records": entries}
        _write_json(out / "sr" / f"{model_id}.json", {**sr_doc, "provenance": _provenance({"cmd": "upscale", "upscaler": spec}, manifest.seed)})
        results = _run_recognize(entries, out, recognize_fn, args.jobs)
        rec_doc = {"model_id": model_id, "results": results}
        reports.append(
            _evaluate_model(manifest, root, sr_doc, rec_doc, out, out / "reports", formats)
        )

    reports.sort(
        key=lambda r: (r.summary["exact_match_rate"], r.summary["char_accuracy"]),
        reverse=True,
    )
    table = [
        {
            "model_id": r.model_id,
            "exact_match_rate": r.summary["exact_match_rate"],
            "char_accuracy": r.summary["char_accuracy"],
            "precision_micro": r.summary["precision_micro"],
            "psnr_mean_db": r.summary["psnr_mean_db"],
            "ssim_mean": r.summary["ssim_mean"],
        }
        for r in reports
    ]
    combined = {
        "ranking": table,
        "provenance": _provenance(
            {"cmd": "compare", "upscalers": specs, "recognizer": args.recognizer},
            manifest.seed,
        ),
    }
    _write_json(out / "reports" / "compare.json", combined)
    if "csv" in formats:
        lines = ["model,exact_match_rate,char_accuracy,precision_micro,psnr_mean_db,ssim_mean"]
        for row in table:
            psnr_txt = "" if row["psnr_mean_db"] is None else f"{row['psnr_mean_db']:.4f}"
            lines.append(
                f"{row['model_id']},{row['exact_match_rate']:.6f},{row['char_accuracy']:.6f},"
                f"{row['precision_micro']:.6f},{psnr_txt},{row['ssim_mean']:.6f}"
            )
        (out / "reports" / "compare.csv").write_text("\n".join(lines) + "\n")
    if "svg" in formats:
        (out / "reports" / "compare.svg").write_text(metrics.comparison_svg(reports))
    for row in table:
        print(
            f"{row['model_id']}: exact={row['exact_match_rate']:.3f} "
            f"char_acc={row['char_accuracy']:.3f}"
        )
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------


# keys a run-config JSON file may provide; explicit flags always win
_RUN_CONFIG_KEYS = (
    "manifest",
    "preset",
    "config",
    "scale",
    "upscaler",
    "upscalers",
    "recognizer",
    "weights",
    "adapter_cmd",
    "out",
    "seed",
    "jobs",
    "n",
    "render_scale",
    "report_format",
)

_POST_MERGE_DEFAULTS = {
    "jobs": 1,
    "render_scale": 2,
    "recognizer": "builtin",
    "report_format": "json,csv,svg",
}


def _apply_run_config(args) -> None:
    """Fill unset argparse values from a RunConfig JSON file, then apply
    the remaining defaults. Flags that were passed explicitly stay."""
    path = getattr(args, "run_config", None)
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read run config {path}: {exc}")
        unknown = sorted(set(doc) - set(_RUN_CONFIG_KEYS))
        if unknown:
            raise InvalidArgumentError(f"unknown run-config keys: {', '.join(unknown)}")
        for key, value in doc.items():
            if hasattr(args, key) and getattr(args, key) is None:
                setattr(args, key, value)
    for key, value in _POST_MERGE_DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise InvalidArgumentError(
                f"--{name.replace('_', '-')} is required (flag or run-config key)"
            )


def _add_common(p, *, jobs=True, seed=False):
    p.add_argument("--run-config", help="JSON file providing defaults; flags override")
    if jobs:
        p.add_argument("--jobs", type=int, help="parallel workers")
    if seed:
        p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="platesr", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"platesr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic plate corpus")
    p.add_argument("--out")
    p.add_argument("--n", type=int)
    p.add_argument("--render-scale", type=int, help="glyph cell multiplier (default 2)")
    _add_common(p, jobs=False, seed=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest", help="build a manifest from annotations.jsonl")
    p.add_argument("--root", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("degrade", help="generate LR images")
    p.add_argument("--manifest")
    p.add_argument("--preset", help=f"one of {sorted(PRESETS)}")
    p.add_argument("--config", help="degradation config JSON file")
    p.add_argument("--scale", type=float, help="override scale factor")
    p.add_argument("--seed", type=int, help="override config seed")
    _add_common(p)
    p.set_defaults(fn=cmd_degrade)

    p = sub.add_parser("upscale", help="restore LR images")
    p.add_argument("--manifest")
    p.add_argument("--upscaler", choices=["bilinear", "bicubic", "generator", "external"])
    p.add_argument("--weights", help="SRWT1 weights for the generator upscaler")
    p.add_argument("--adapter-cmd", help="external command with {in} {out} placeholders")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(fn=cmd_upscale)

    p = sub.add_parser("recognize", help="read plate strings from SR outputs")
    p.add_argument("--sr", help="sr/<model>.json from upscale")
    p.add_argument("--recognizer", choices=["builtin", "external"])
    p.add_argument("--adapter-cmd", help="external command with an {img} placeholder")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(fn=cmd_recognize)

    p = sub.add_parser("evaluate", help="score one model")
    p.add_argument("--manifest")
    p.add_argument("--sr")
    p.add_argument("--recognition")
    p.add_argument("--out")
    p.add_argument("--report-format")
    _add_common(p, jobs=False)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("compare", help="run and rank several upscalers")
    p.add_argument("--manifest")
    p.add_argument("--upscalers", help="comma list, e.g. bilinear,bicubic")
    p.add_argument("--recognizer", choices=["builtin", "external"])
    p.add_argument("--weights")
    p.add_argument("--adapter-cmd")
    p.add_argument("--out")
    p.add_argument("--report-format")
    _add_common(p)
    p.set_defaults(fn=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        _apply_run_config(args)
        return args.fn(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PlateSRError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # unexpected runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
