"""Fidelity and recognition scoring.

PSNR, windowed SSIM, Levenshtein string alignment, character confusion
matrices over A-Z/0-9 plus an epsilon slot for insertions and deletions,
the binary accuracy/precision closed forms, and per-model report assembly
(JSON, CSV, grouped-bar SVG).

The plate task has no negative plate class, so the binary confusion
formulas are applied at the character level: a predicted character is
"positive" for its class, and per-class counts reduce micro or macro.
PSNR of identical images is reported as None and serialized as null.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, UndefinedMetricError
from .imgcore import ImageF32, to_gray

ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
EPSILON = "ε"  # insertion/deletion slot
_CLASSES = ALPHABET + EPSILON
_INDEX = {ch: i for i, ch in enumerate(_CLASSES)}


# ---------------------------------------------------------------------------
# Image fidelity
# ---------------------------------------------------------------------------


def psnr(ref: ImageF32, test: ImageF32, peak: float = 1.0) -> float | None:
    """10 log10(peak^2 / MSE) over all samples; None when images are
    identical (MSE 0), which serializes as null rather than infinity."""
    if ref.data.shape != test.data.shape:
        raise InvalidArgumentError(
            f"dimension mismatch: {ref.data.shape} vs {test.data.shape}"
        )
    diff = ref.data.astype(np.float64) - test.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return None
    return 10.0 * math.log10(peak * peak / mse)


_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _ssim_window() -> np.ndarray:
    half = _SSIM_WINDOW // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax * ax) / (2.0 * _SSIM_SIGMA * _SSIM_SIGMA))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(ref: ImageF32, test: ImageF32) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5) on the luma
    channel, K1=0.01, K2=0.03, dynamic range 1."""
    if ref.data.shape != test.data.shape:
        raise InvalidArgumentError(
            f"dimension mismatch: {ref.data.shape} vs {test.data.shape}"
        )
    if ref.height < _SSIM_WINDOW or ref.width < _SSIM_WINDOW:
        raise InvalidArgumentError(
            f"image {ref.width}x{ref.height} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window"
        )
    x = to_gray(ref).data[0].astype(np.float64)
    y = to_gray(test).data[0].astype(np.float64)
    w = _ssim_window()

    xw = np.lib.stride_tricks.sliding_window_view(x, (_SSIM_WINDOW, _SSIM_WINDOW))
    yw = np.lib.stride_tricks.sliding_window_view(y, (_SSIM_WINDOW, _SSIM_WINDOW))
    mu_x = np.tensordot(xw, w, axes=([2, 3], [0, 1]))
    mu_y = np.tensordot(yw, w, axes=([2, 3], [0, 1]))
    xx = np.tensordot(xw * xw, w, axes=([2, 3], [0, 1]))
    yy = np.tensordot(yw * yw, w, axes=([2, 3], [0, 1]))
    xy = np.tensordot(xw * yw, w, axes=([2, 3], [0, 1]))

    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    c1 = _SSIM_K1 * _SSIM_K1
    c2 = _SSIM_K2 * _SSIM_K2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# String alignment and confusion counting
# ---------------------------------------------------------------------------


def align_strings(pred: str, truth: str) -> list[tuple[str, str]]:
    """Levenshtein alignment with unit costs.

    Returns (pred_char | epsilon, truth_char | epsilon) pairs in order.
    Traceback prefers substitute, then delete (epsilon, truth), then
    insert (pred, epsilon), so ties resolve deterministically. Hyphens are
    stripped before alignment.
    """
    a = pred.replace("-", "")
    b = truth.replace("-", "")
    n, m = len(a), len(b)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = d[i - 1, j - 1] + (a[i - 1] != b[j - 1])
            d[i, j] = min(sub, d[i, j - 1] + 1, d[i - 1, j] + 1)

    pairs: list[tuple[str, str]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (a[i - 1] != b[j - 1]):
            pairs.append((a[i - 1], b[j - 1]))
            i -= 1
            j -= 1
        elif j > 0 and d[i, j] == d[i, j - 1] + 1:
            pairs.append((EPSILON, b[j - 1]))
            j -= 1
        else:
            pairs.append((a[i - 1], EPSILON))
            i -= 1
    pairs.reverse()
    return pairs


@dataclass
class CharConfusionMatrix:
    """37x37 grid over A-Z, 0-9, epsilon. Rows index truth, columns
    prediction; row sums over the 36 real rows equal truth-char counts."""

    counts: np.ndarray = field(
        default_factory=lambda: np.zeros((len(_CLASSES), len(_CLASSES)), dtype=np.int64)
    )

    def add_pair(self, pred_char: str, truth_char: str) -> None:
        self.counts[_INDEX[truth_char], _INDEX[pred_char]] += 1

    def truth_total(self) -> int:
        return int(self.counts[:-1, :].sum())

    def correct_total(self) -> int:
        return int(np.trace(self.counts[:-1, :-1]))

    def char_accuracy(self) -> float:
        total = self.truth_total()
        if total == 0:
            raise UndefinedMetricError("no truth characters accumulated")
        return self.correct_total() / total

    def class_counts(self, ch: str) -> "ConfusionCounts":
        """Binary one-vs-rest reduction for one character class."""
        i = _INDEX[ch]
        tp = int(self.counts[i, i])
        fp = int(self.counts[:, i].sum()) - tp
        fn = int(self.counts[i, :].sum()) - tp
        tn = int(self.counts.sum()) - tp - fp - fn
        return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)

    def micro_precision(self) -> float:
        tp = sum(int(self.counts[i, i]) for i in range(len(ALPHABET)))
        predicted = int(self.counts[:, :-1].sum())
        if predicted == 0:
            raise UndefinedMetricError("no predicted characters accumulated")
        return tp / predicted

    def macro_precision(self) -> float:
        """Mean per-class precision over classes that were predicted at
        least once; epsilon excluded."""
        vals = []
        for ch in ALPHABET:
            c = self.class_counts(ch)
            if c.tp + c.fp > 0:
                vals.append(precision(c))
        if not vals:
            raise UndefinedMetricError("no predicted characters accumulated")
        return float(np.mean(vals))

    def to_lists(self) -> list[list[int]]:
        return self.counts.tolist()


def char_confusion(records: list[tuple[str, str]]) -> CharConfusionMatrix:
    """Accumulate aligned (pred, truth) string pairs into a confusion grid."""
    m = CharConfusionMatrix()
    for pred, truth in records:
        for p, t in align_strings(pred, truth):
            m.add_pair(p, t)
    return m


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise InvalidArgumentError("confusion counts must be nonnegative")


def accuracy(c: ConfusionCounts) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    denom = c.tp + c.tn + c.fp + c.fn
    if denom == 0:
        raise UndefinedMetricError("accuracy undefined: all counts are zero")
    return (c.tp + c.tn) / denom


def precision(c: ConfusionCounts) -> float:
    """TP / (TP + FP)."""
    denom = c.tp + c.fp
    if denom == 0:
        raise UndefinedMetricError("precision undefined: no positive predictions")
    return c.tp / denom


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


def normalize_plate(text: str) -> str:
    """Uppercase and drop hyphens for exact-match comparison."""
    return text.upper().replace("-", "")


@dataclass(frozen=True)
class EvalRow:
    """Per-image evaluation record."""

    id: str
    psnr_db: float | None
    ssim: float
    pred: str
    truth: str

    @property
    def exact_match(self) -> bool:
        return normalize_plate(self.pred) == normalize_plate(self.truth)

    @property
    def char_errors(self) -> int:
        return sum(p != t for p, t in align_strings(self.pred, self.truth))


@dataclass
class EvalReport:
    model_id: str
    rows: list[EvalRow]
    confusion: CharConfusionMatrix
    summary: dict
    provenance: dict


def build_report(
    rows: list[EvalRow], model_id: str, provenance: dict | None = None
) -> EvalReport:
    """Aggregate per-image rows; order of rows does not affect aggregates."""
    if not rows:
        raise UndefinedMetricError("cannot build a report from zero records")
    rows = sorted(rows, key=lambda r: r.id)
    confusion = char_confusion([(r.pred, r.truth) for r in rows])

    psnrs = [r.psnr_db for r in rows if r.psnr_db is not None]
    ssims = [r.ssim for r in rows]
    summary = {
        "n_images": len(rows),
        "psnr_mean_db": float(np.mean(psnrs)) if psnrs else None,
        "psnr_stddev_db": float(np.std(psnrs)) if psnrs else None,
        "psnr_identical_count": sum(r.psnr_db is None for r in rows),
        "ssim_mean": float(np.mean(ssims)),
        "ssim_stddev": float(np.std(ssims)),
        "char_accuracy": confusion.char_accuracy(),
        "precision_micro": confusion.micro_precision(),
        "precision_macro": confusion.macro_precision(),
        "exact_match_rate": sum(r.exact_match for r in rows) / len(rows),
    }
    return EvalReport(
        model_id=model_id,
        rows=rows,
        confusion=confusion,
        summary=summary,
        provenance=dict(provenance or {}),
    )


def report_to_json(report: EvalReport) -> str:
    doc = {
        "model_id": report.model_id,
        "summary": report.summary,
        "rows": [
            {
                "id": r.id,
                "psnr_db": r.psnr_db,
                "ssim": r.ssim,
                "pred": r.pred,
                "truth": r.truth,
                "exact_match": r.exact_match,
                "char_errors": r.char_errors,
            }
            for r in report.rows
        ],
        "confusion_alphabet": _CLASSES,
        "confusion_counts": report.confusion.to_lists(),
        "provenance": report.provenance,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def report_to_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["id", "model", "psnr_db", "ssim", "pred", "truth", "exact_match", "char_errors"]
    )
    for r in report.rows:
        writer.writerow(
            [
                r.id,
                report.model_id,
                "" if r.psnr_db is None else f"{r.psnr_db:.6f}",
                f"{r.ssim:.6f}",
                r.pred,
                r.truth,
                int(r.exact_match),
                r.char_errors,
            ]
        )
    return buf.getvalue()


_SVG_METRICS = [
    ("exact_match_rate", "exact match"),
    ("char_accuracy", "char accuracy"),
    ("precision_micro", "precision (micro)"),
    ("ssim_mean", "mean SSIM"),
]


def comparison_svg(reports: list[EvalReport]) -> str:
    """Grouped bar chart: one group per metric, one bar per model.

    All charted metrics live in [0, 1]; PSNR stays in the tables.
    """
    if not reports:
        raise UndefinedMetricError("no reports to chart")
    bar_w = 34
    gap = 18
    group_w = bar_w * len(reports) + gap * 2
    plot_h = 220
    margin_l, margin_t, margin_b = 50, 30, 60
    width = margin_l + group_w * len(_SVG_METRICS) + 20
    height = margin_t + plot_h + margin_b
    palette = ["#4878a8", "#d1605e", "#6aa56a", "#b098c9", "#8a7a66", "#d8b36a"]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = margin_t + plot_h * (1.0 - frac)
        parts.append(
            f'<line x1="{margin_l}" y1="{y:.1f}" x2="{width - 10}" y2="{y:.1f}" '
            f'stroke="#ddd"/>'
            f'<text x="{margin_l - 6}" y="{y + 4:.1f}" text-anchor="end">{frac:.2f}</text>'
        )
    for gi, (key, label) in enumerate(_SVG_METRICS):
        gx = margin_l + gi * group_w + gap
        for mi, rep in enumerate(reports):
            val = rep.summary[key]
            h = plot_h * max(0.0, min(1.0, val))
            x = gx + mi * bar_w
            y = margin_t + plot_h - h
            color = palette[mi % len(palette)]
            parts.append(
                f'<rect x="{x}" y="{y:.1f}" width="{bar_w - 4}" height="{h:.1f}" '
                f'fill="{color}"/>'
                f'<text x="{x + (bar_w - 4) / 2}" y="{y - 3:.1f}" text-anchor="middle">'
                f"{val:.2f}</text>"
            )
        parts.append(
            f'<text x="{gx + (bar_w * len(reports)) / 2}" y="{margin_t + plot_h + 16}" '
            f'text-anchor="middle">{label}</text>'
        )
    for mi, rep in enumerate(reports):
        color = palette[mi % len(palette)]
        lx = margin_l + mi * 150
        ly = height - 22
        parts.append(
            f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" fill="{color}"/>'
            f'<text x="{lx + 16}" y="{ly}">{rep.model_id}</text>'
        )
    parts.append("</svg>")
    return "".join(parts)
