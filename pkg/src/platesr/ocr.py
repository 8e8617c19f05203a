"""Plate-string recognition.

The builtin recognizer mirrors the classic OCR stage chain so the whole
benchmark runs hermetically: binarize and denoise, segment connected
components, template-match against a font atlas, then repair against
plate patterns. An external adapter wraps a real OCR engine through a
command-template contract when one is installed.

The atlas is generated from embedded stroke definitions covering A-Z and
0-9 in 16x24 cells, then iterated to a fixed point of the 3x3 median
filter at build time. Rendered glyphs are therefore invariant under the
preprocessing denoise, so clean renders segment into components identical
to the templates and are recognized perfectly by construction.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, replace
from functools import lru_cache

import json
import numpy as np
import scipy.ndimage

from .errors import AdapterError, DegenerateInputError, InvalidArgumentError
from .imgcore import ImageF32, otsu_binarize, resize, to_gray, write_png
from .metrics import ALPHABET

# Each position's letter/digit repair partner; applied only when the raw
# character violates the pattern's class at that position.
CONFUSABLES = {
    "O": "0", "0": "O",
    "I": "1", "1": "I",
    "B": "8", "8": "B",
    "S": "5", "5": "S",
    "Z": "2", "2": "Z",
}

# Taiwan plate shapes: the 7-char format (3 letters, 4 digits) plus both
# groupings seen in the older 6-char formats.
DEFAULT_PATTERNS = ["LLL-NNNN", "LL-NNNN", "NNNN-LL"]

# Stroke definitions on a 16x24 canvas: ("r", x0, y0, x1, y1) filled
# rectangles (inclusive) and ("d", x0, y0, x1, y1[, w]) thick staircase
# lines anchored top-left. Strokes are 4 px so shapes survive median
# filtering; holes are kept >= 3 px so they do not fill in.
_CELL_W, _CELL_H = 16, 24

_GLYPH_STROKES = {
    "A": [("r", 2, 0, 13, 3), ("r", 0, 2, 3, 23), ("r", 12, 2, 15, 23), ("r", 3, 12, 12, 15)],
    "B": [("r", 0, 0, 3, 23), ("r", 0, 0, 13, 3), ("r", 0, 10, 13, 13), ("r", 0, 20, 13, 23), ("r", 12, 2, 15, 9), ("r", 12, 14, 15, 19)],
    "C": [("r", 2, 0, 13, 3), ("r", 2, 20, 13, 23), ("r", 0, 2, 3, 21), ("r", 12, 2, 15, 7), ("r", 12, 16, 15, 21)],
    "D": [("r", 0, 0, 3, 23), ("r", 0, 0, 13, 3), ("r", 0, 20, 13, 23), ("r", 12, 2, 15, 21)],
    "E": [("r", 0, 0, 3, 23), ("r", 0, 0, 15, 3), ("r", 0, 10, 11, 13), ("r", 0, 20, 15, 23)],
    "F": [("r", 0, 0, 3, 23), ("r", 0, 0, 15, 3), ("r", 0, 10, 11, 13)],
    "G": [("r", 2, 0, 13, 3), ("r", 0, 2, 3, 21), ("r", 2, 20, 13, 23), ("r", 12, 12, 15, 21), ("r", 8, 10, 15, 13), ("r", 12, 2, 15, 6)],
    "H": [("r", 0, 0, 3, 23), ("r", 12, 0, 15, 23), ("r", 0, 10, 15, 13)],
    "I": [("r", 2, 0, 13, 3), ("r", 2, 20, 13, 23), ("r", 6, 2, 9, 21)],
    "J": [("r", 4, 0, 15, 3), ("r", 10, 2, 13, 21), ("r", 2, 18, 11, 21), ("r", 0, 12, 3, 19)],
    "K": [("r", 0, 0, 3, 23), ("d", 3, 10, 12, 0), ("d", 3, 12, 12, 20)],
    "L": [("r", 0, 0, 3, 23), ("r", 0, 20, 13, 23)],
    "M": [("r", 0, 0, 3, 23), ("r", 12, 0, 15, 23), ("d", 0, 0, 6, 10), ("d", 6, 10, 12, 0)],
    "N": [("r", 0, 0, 3, 23), ("r", 12, 0, 15, 23), ("d", 0, 0, 12, 20)],
    "O": [("r", 2, 0, 13, 3), ("r", 2, 20, 13, 23), ("r", 0, 2, 3, 21), ("r", 12, 2, 15, 21)],
    "P": [("r", 0, 0, 3, 23), ("r", 0, 0, 13, 3), ("r", 0, 10, 13, 13), ("r", 12, 2, 15, 11)],
    "Q": [("r", 2, 0, 13, 3), ("r", 2, 20, 13, 23), ("r", 0, 2, 3, 21), ("r", 12, 2, 15, 21), ("d", 8, 14, 12, 20)],
    "R": [("r", 0, 0, 3, 23), ("r", 0, 0, 13, 3), ("r", 0, 10, 13, 13), ("r", 12, 2, 15, 11), ("d", 4, 14, 12, 20)],
    "S": [("r", 2, 0, 13, 3), ("r", 0, 2, 3, 9), ("r", 2, 10, 13, 13), ("r", 12, 12, 15, 21), ("r", 2, 20, 13, 23), ("r", 12, 2, 15, 5), ("r", 0, 18, 3, 21)],
    "T": [("r", 0, 0, 15, 3), ("r", 6, 2, 9, 23)],
    "U": [("r", 0, 0, 3, 21), ("r", 12, 0, 15, 21), ("r", 2, 20, 13, 23)],
    "V": [("d", 0, 0, 6, 19), ("d", 12, 0, 6, 19)],
    "W": [("r", 0, 0, 3, 21), ("r", 12, 0, 15, 21), ("r", 0, 20, 15, 23), ("r", 6, 8, 9, 21)],
    "X": [("d", 0, 0, 12, 20), ("d", 12, 0, 0, 20)],
    "Y": [("d", 0, 0, 6, 9), ("d", 12, 0, 6, 9), ("r", 6, 8, 9, 23)],
    "Z": [("r", 0, 0, 15, 3), ("d", 12, 2, 0, 18), ("r", 0, 20, 15, 23)],
    "0": [("r", 2, 0, 13, 3), ("r", 2, 20, 13, 23), ("r", 0, 2, 3, 21), ("r", 12, 2, 15, 21), ("d", 9, 3, 4, 18, 3)],
    "1": [("r", 6, 0, 9, 21), ("r", 2, 2, 7, 5), ("r", 2, 20, 13, 23)],
    "2": [("r", 2, 0, 13, 3), ("r", 12, 2, 15, 9), ("d", 12, 8, 0, 18), ("r", 0, 20, 15, 23)],
    "3": [("r", 2, 0, 13, 3), ("r", 12, 2, 15, 21), ("r", 6, 10, 13, 13), ("r", 2, 20, 13, 23)],
    "4": [("r", 10, 0, 13, 23), ("d", 10, 0, 0, 11), ("r", 0, 12, 15, 15)],
    "5": [("r", 0, 0, 13, 3), ("r", 0, 2, 3, 11), ("r", 0, 8, 13, 11), ("r", 12, 10, 15, 21), ("r", 2, 20, 13, 23)],
    "6": [("r", 0, 2, 3, 21), ("r", 2, 0, 13, 3), ("r", 2, 10, 13, 13), ("r", 12, 12, 15, 21), ("r", 2, 20, 13, 23)],
    "7": [("r", 0, 0, 15, 3), ("d", 12, 2, 4, 20)],
    "8": [("r", 2, 0, 13, 3), ("r", 2, 10, 13, 13), ("r", 2, 20, 13, 23), ("r", 0, 2, 3, 21), ("r", 12, 2, 15, 21)],
    "9": [("r", 2, 0, 13, 3), ("r", 0, 2, 3, 11), ("r", 2, 10, 13, 13), ("r", 12, 2, 15, 21), ("r", 2, 20, 13, 23)],
}

_HYPHEN_STROKES = [("r", 2, 10, 13, 13)]


@dataclass(frozen=True)
class PlateString:
    """Normalized recognition result.

    text is uppercase A-Z/0-9 with at most one hyphen, or empty with zero
    confidence; raw preserves the unnormalized engine output;
    matched_pattern is None when no plate pattern fit (no-pattern flag).
    """

    text: str
    raw: str
    confidence: float
    matched_pattern: str | None = None

    def __post_init__(self):
        if self.text == "":
            if self.confidence != 0.0:
                raise InvalidArgumentError("empty plate text requires confidence 0")
            return
        parts = self.text.split("-")
        if len(parts) > 2 or not all(p and all(c in ALPHABET for c in p) for p in parts):
            raise InvalidArgumentError(f"malformed plate text {self.text!r}")


@dataclass(frozen=True)
class CharBox:
    x: int
    y: int
    w: int
    h: int
    glyph: ImageF32

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise InvalidArgumentError("character box must be at least 1x1")


class FontAtlas:
    """Binary glyph templates for A-Z and 0-9 in fixed-size cells."""

    def __init__(self, glyphs: dict[str, np.ndarray], cell_w: int = 16, cell_h: int = 24):
        if sorted(glyphs) != sorted(ALPHABET):
            missing = sorted(set(ALPHABET) - set(glyphs))
            raise InvalidArgumentError(f"atlas must cover A-Z and 0-9, missing {missing}")
        self.cell_w = cell_w
        self.cell_h = cell_h
        self.glyphs: dict[str, np.ndarray] = {}
        for ch, bitmap in glyphs.items():
            arr = np.ascontiguousarray(bitmap, dtype=np.float32)
            if arr.shape != (cell_h, cell_w):
                raise InvalidArgumentError(
                    f"glyph {ch!r} has shape {arr.shape}, expected {(cell_h, cell_w)}"
                )
            arr.flags.writeable = False
            self.glyphs[ch] = arr
        self._normalized = {
            ch: _normalize_glyph_array(arr, cell_w, cell_h)
            for ch, arr in self.glyphs.items()
        }

    def normalized_template(self, ch: str) -> np.ndarray:
        return self._normalized[ch]


def _draw_strokes(strokes) -> np.ndarray:
    cell = np.zeros((_CELL_H, _CELL_W), dtype=np.float32)
    for s in strokes:
        if s[0] == "r":
            _, x0, y0, x1, y1 = s
            cell[max(0, y0) : y1 + 1, max(0, x0) : x1 + 1] = 1.0
        else:
            _, x0, y0, x1, y1 = s[:5]
            w = s[5] if len(s) > 5 else 4
            n = max(abs(x1 - x0), abs(y1 - y0)) + 1
            for i in range(n):
                x = round(x0 + (x1 - x0) * i / (n - 1)) if n > 1 else x0
                y = round(y0 + (y1 - y0) * i / (n - 1)) if n > 1 else y0
                cell[max(0, y) : min(_CELL_H, y + w), max(0, x) : min(_CELL_W, x + w)] = 1.0
    return cell


def _median_fixpoint(cell: np.ndarray, cap: int = 40) -> np.ndarray:
    """Iterate the 3x3 median (with background context) to a fixed point."""
    for _ in range(cap):
        padded = np.pad(cell, 1)
        nxt = scipy.ndimage.median_filter(padded, size=3)[1:-1, 1:-1]
        if np.array_equal(nxt, cell):
            return cell
        cell = nxt
    raise InvalidArgumentError("glyph did not reach a median fixed point")


@lru_cache(maxsize=1)
def builtin_atlas() -> FontAtlas:
    """Default atlas: embedded stroke font, median-stabilized, 16x24 cells."""
    glyphs = {
        ch: _median_fixpoint(_draw_strokes(strokes))
        for ch, strokes in _GLYPH_STROKES.items()
    }
    return FontAtlas(glyphs, _CELL_W, _CELL_H)


@lru_cache(maxsize=1)
def _hyphen_cell() -> np.ndarray:
    return _median_fixpoint(_draw_strokes(_HYPHEN_STROKES))


# ---------------------------------------------------------------------------
# Rendering (the synthetic-corpus generator; also what the atlas matches)
# ---------------------------------------------------------------------------


def render_plate(
    text: str,
    atlas: FontAtlas | None = None,
    scale: int = 1,
    margin: int = 8,
    spacing: int = 4,
    fg: float = 0.0,
    bg: float = 1.0,
    rng: np.random.Generator | None = None,
) -> ImageF32:
    """Render a plate string as a 3-channel image, dark glyphs on light
    background by default.

    With an rng, applies light geometric jitter (per-glyph vertical offset
    and spacing wobble) plus small fg/bg intensity shifts.
    """
    atlas = atlas or builtin_atlas()
    if not text:
        raise InvalidArgumentError("cannot render an empty plate")
    cw, chh = atlas.cell_w * scale, atlas.cell_h * scale
    margin *= scale
    spacing *= scale

    if rng is not None:
        fg = float(rng.uniform(0.0, 0.12))
        bg = float(rng.uniform(0.88, 1.0))

    cells = []
    for ch in text.upper():
        if ch == "-":
            cells.append(_hyphen_cell())
        elif ch in atlas.glyphs:
            cells.append(atlas.glyphs[ch])
        else:
            raise InvalidArgumentError(f"cannot render character {ch!r}")

    gaps = []
    offsets = []
    for i in range(len(cells)):
        if rng is not None:
            offsets.append(int(rng.integers(-1, 2)) * scale)
            gaps.append(spacing + int(rng.integers(-1, 2)) * scale)
        else:
            offsets.append(0)
            gaps.append(spacing)

    width = 2 * margin + len(cells) * cw + sum(gaps[:-1]) if cells else 2 * margin
    height = 2 * margin + chh
    canvas = np.full((height, width), np.float32(bg), dtype=np.float32)

    x = margin
    for i, cell in enumerate(cells):
        big = cell.repeat(scale, axis=0).repeat(scale, axis=1) if scale > 1 else cell
        y = margin + offsets[i]
        mask = big > 0.5
        region = canvas[y : y + chh, x : x + cw]
        region[mask] = np.float32(fg)
        x += cw + (gaps[i] if i < len(cells) - 1 else 0)

    return ImageF32(np.broadcast_to(canvas, (3, height, width)).copy())


# ---------------------------------------------------------------------------
# Stage 1: preprocessing
# ---------------------------------------------------------------------------


def preprocess_plate(img: ImageF32) -> ImageF32 | None:
    """Grayscale, 3x3 median denoise, Otsu binarize, then normalize
    polarity so characters (the minority class) are 1.

    Returns None for degenerate (constant) images: the empty-plate signal.
    Deskew is deliberately omitted; crops are assumed roughly axis-aligned.
    """
    gray = to_gray(img)
    denoised = scipy.ndimage.median_filter(gray.data[0], size=3)
    try:
        _, binary = otsu_binarize(ImageF32(denoised[np.newaxis]))
    except DegenerateInputError:
        return None
    data = binary.data
    if float(data.mean()) > 0.5:
        data = 1.0 - data
    return ImageF32(data)


# ---------------------------------------------------------------------------
# Stage 2: segmentation
# ---------------------------------------------------------------------------

_MIN_AREA_FRAC = 0.005
_MAX_AREA_FRAC = 0.40
_MIN_ASPECT = 0.8
_MAX_ASPECT = 6.0


def segment_chars(binary: ImageF32) -> list[CharBox]:
    """4-connected components filtered by area and aspect, left to right.

    Touching glyphs merge into one component; that is a documented
    limitation of the builtin recognizer.
    """
    plane = binary.data[0] > 0.5
    labels, count = scipy.ndimage.label(plane)
    total = plane.size
    boxes: list[CharBox] = []
    for idx, sl in enumerate(scipy.ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        mask = labels[sl] == idx
        area = int(mask.sum())
        if area < _MIN_AREA_FRAC * total or area > _MAX_AREA_FRAC * total:
            continue
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        aspect = h / w
        if aspect < _MIN_ASPECT or aspect > _MAX_ASPECT:
            continue
        boxes.append(
            CharBox(
                x=sl[1].start,
                y=sl[0].start,
                w=w,
                h=h,
                glyph=ImageF32(mask.astype(np.float32)[np.newaxis]),
            )
        )
    boxes.sort(key=lambda b: b.x)
    return boxes


# ---------------------------------------------------------------------------
# Stage 3: template matching
# ---------------------------------------------------------------------------


def _normalize_glyph_array(arr: np.ndarray, cell_w: int, cell_h: int) -> np.ndarray | None:
    """Tight-crop to the foreground bbox and resize to the cell, so both
    templates and segmented crops are compared in the same frame."""
    ys, xs = np.nonzero(arr > 0.5)
    if ys.size == 0:
        return None
    crop = arr[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
    img = ImageF32(crop.astype(np.float32)[np.newaxis])
    return resize(img, cell_w, cell_h, "bilinear").data[0].astype(np.float64)


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0:
        return 0.0
    return float((da * db).sum() / denom)


def match_char(glyph: ImageF32, atlas: FontAtlas) -> tuple[str, float]:
    """Best NCC match over the atlas; ('?', 0.0) for empty glyphs.

    Ties break toward the smaller character ordinal.
    """
    if glyph.channels != 1:
        raise InvalidArgumentError("glyph must be single-channel")
    g = _normalize_glyph_array(glyph.data[0], atlas.cell_w, atlas.cell_h)
    if g is None:
        return "?", 0.0
    best_char, best_score = "?", -2.0
    for ch in sorted(atlas.glyphs):
        t = atlas.normalized_template(ch)
        s = _ncc(g, t)
        if s > best_score:
            best_char, best_score = ch, s
    return best_char, best_score


# ---------------------------------------------------------------------------
# Stage 4: pattern repair
# ---------------------------------------------------------------------------


def _satisfies(ch: str, cls: str) -> bool:
    return ch.isalpha() if cls == "L" else ch.isdigit()


def postprocess_plate(
    chars: list[tuple[str, float]], patterns: list[str] | None = None
) -> PlateString:
    """Concatenate matches, fit against plate patterns, repair confusables
    toward the required class, and hyphenate at the pattern boundary.

    If no pattern fits, the raw text is preserved (filtered to the plate
    alphabet) and matched_pattern stays None.
    """
    if patterns is None:
        patterns = DEFAULT_PATTERNS
    raw = "".join(c for c, _ in chars)
    scores = [s for _, s in chars]
    confidence = float(np.clip(np.mean(scores), 0.0, 1.0)) if scores else 0.0

    def try_pattern(pattern: str, allow_repair: bool) -> PlateString | None:
        core = pattern.replace("-", "")
        if len(core) != len(raw):
            return None
        repaired = []
        for ch, cls in zip(raw, core):
            if ch in ALPHABET and _satisfies(ch, cls):
                repaired.append(ch)
            elif allow_repair and ch in CONFUSABLES and _satisfies(CONFUSABLES[ch], cls):
                repaired.append(CONFUSABLES[ch])
            else:
                return None
        text = "".join(repaired)
        if "-" in pattern:
            cut = pattern.index("-")
            text = text[:cut] + "-" + text[cut:]
        return PlateString(text, raw, confidence, pattern)

    # patterns satisfied verbatim win over ones that need confusable repair
    for allow_repair in (False, True):
        for pattern in patterns:
            result = try_pattern(pattern, allow_repair)
            if result is not None:
                return result

    cleaned = "".join(c for c in raw if c in ALPHABET)
    if not cleaned:
        return PlateString("", raw, 0.0, None)
    return PlateString(cleaned, raw, confidence, None)


def load_patterns(path) -> list[str]:
    """Pattern file: JSON list of strings over {L, N, -}."""
    with open(path) as f:
        patterns = json.load(f)
    if not isinstance(patterns, list) or not patterns:
        raise InvalidArgumentError("pattern file must be a non-empty JSON list")
    for p in patterns:
        if not isinstance(p, str) or not p or any(c not in "LN-" for c in p):
            raise InvalidArgumentError(f"invalid pattern {p!r}: alphabet is L, N, -")
        if p.count("-") > 1 or p.startswith("-") or p.endswith("-"):
            raise InvalidArgumentError(f"invalid pattern {p!r}: at most one interior hyphen")
    return patterns


# ---------------------------------------------------------------------------
# Stage 5 composition + external adapter
# ---------------------------------------------------------------------------


def recognize_builtin(
    img: ImageF32, atlas: FontAtlas | None = None, patterns: list[str] | None = None
) -> PlateString:
    """Full builtin chain: preprocess, segment, match, postprocess."""
    atlas = atlas or builtin_atlas()
    binary = preprocess_plate(img)
    if binary is None:
        return PlateString("", "", 0.0, None)
    boxes = segment_chars(binary)
    if not boxes:
        return PlateString("", "", 0.0, None)
    chars = [match_char(b.glyph, atlas) for b in boxes]
    return postprocess_plate(chars, patterns)


def recognize_external(
    img: ImageF32,
    command: str | list[str],
    timeout: float = 30.0,
    patterns: list[str] | None = None,
) -> PlateString:
    """Run an external OCR adapter on the image.

    The command template must contain an ``{img}`` placeholder, replaced
    by the path of a temporary PNG. The first stdout line, trimmed and
    uppercased, is parsed through the same pattern postprocessing as the
    builtin path. Nonzero exit, spawn failure, or timeout raise
    AdapterError with captured stderr.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    if not any("{img}" in a for a in argv):
        raise InvalidArgumentError("adapter command must contain an {img} placeholder")

    with tempfile.TemporaryDirectory(prefix="platesr-ocr-") as d:
        path = os.path.join(d, "plate.png")
        write_png(img.clamped(), path)
        argv = [a.replace("{img}", path) for a in argv]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except FileNotFoundError as exc:
            raise AdapterError(f"adapter spawn failed: {exc}")
        except subprocess.TimeoutExpired:
            raise AdapterError(f"adapter timed out after {timeout:.0f}s")
    if proc.returncode != 0:
        raise AdapterError(
            f"adapter exited with status {proc.returncode}", stderr=proc.stderr
        )

    line = proc.stdout.splitlines()[0].strip().upper() if proc.stdout.strip() else ""
    chars = [(c, 1.0) for c in line if c in ALPHABET]
    result = postprocess_plate(chars, patterns)
    return replace(result, raw=line, confidence=result.confidence if chars else 0.0)
