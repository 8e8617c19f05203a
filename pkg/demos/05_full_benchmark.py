"""The whole benchmark as a library call sequence.

Synthesize a corpus, degrade it, restore with two baselines, recognize,
and build comparison reports. This is the same flow as

    platesr synth / degrade / compare

but driven programmatically.
"""

from pathlib import Path

from platesr import dataset, metrics
from platesr.degrade import PRESETS
from platesr.imgcore import read_png, resize
from platesr.ocr import recognize_builtin

root = Path("demo_out/benchmark")
root.mkdir(parents=True, exist_ok=True)

manifest = dataset.synth_plates(25, seed=11, out_dir=root, render_scale=1)
manifest = dataset.make_lr_pairs(manifest, PRESETS["x4-paper"], root)
manifest.save(root / "manifest.json")
print(f"corpus: {len(manifest.records)} plates, degraded x4")

reports = []
for filt in ("bilinear", "bicubic"):
    rows = []
    for rec in manifest.records:
        hr = read_png(root / rec.hr_path)
        lr = read_png(root / rec.lr_path)
        sr = resize(lr, hr.width, hr.height, filt).clamped()
        rows.append(
            metrics.EvalRow(
                id=rec.id,
                psnr_db=metrics.psnr(hr, sr),
                ssim=metrics.ssim(hr, sr),
                pred=recognize_builtin(sr).text,
                truth=rec.truth,
            )
        )
    report = metrics.build_report(rows, filt, {"preset": "x4-paper", "seed": 11})
    reports.append(report)
    s = report.summary
    print(
        f"{filt:9s} exact={s['exact_match_rate']:.2f} "
        f"char={s['char_accuracy']:.3f} psnr={s['psnr_mean_db']:.2f} "
        f"ssim={s['ssim_mean']:.4f}"
    )

(root / "compare.svg").write_text(metrics.comparison_svg(reports))
for report in reports:
    (root / f"report-{report.model_id}.json").write_text(metrics.report_to_json(report))
    (root / f"report-{report.model_id}.csv").write_text(metrics.report_to_csv(report))
print(f"\nreports written to {root}/")
