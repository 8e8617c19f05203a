"""Manifest-driven corpus management.

A dataset root holds ``manifest.json`` plus ``hr/`` and ``lr/`` image
directories; manifests store paths relative to their root so fixture
trees are relocatable. Annotations for ingestion are JSON-lines:
one object per line with path, truth, subset, and an optional crop box.

The real corpus (access control / law enforcement / road patrol subsets
plus dashcam captures, 681/757/611/1000 images) is licensed and not
redistributed; the synthetic renderer stands in for it hermetically.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import __version__
from . import rng as rng_mod
from .degrade import DegradationConfig, degrade_pipeline
from .errors import InvalidArgumentError, ManifestError
from .imgcore import ImageF32, read_png, write_png
from .metrics import ALPHABET
from .ocr import DEFAULT_PATTERNS, FontAtlas, builtin_atlas, render_plate

SUBSETS = ("access_control", "law_enforcement", "road_patrol", "dashcam", "synthetic")


@dataclass(frozen=True)
class PlateRecord:
    id: str
    subset: str
    hr_path: str
    truth: str
    crop_box: tuple[int, int, int, int] | None = None
    lr_path: str | None = None
    degradation: str | None = None

    def __post_init__(self):
        if self.subset not in SUBSETS:
            raise InvalidArgumentError(f"unknown subset {self.subset!r}")
        core = self.truth.replace("-", "")
        if not core or any(c not in ALPHABET for c in core):
            raise InvalidArgumentError(f"truth {self.truth!r} outside plate alphabet")


@dataclass
class Manifest:
    records: list[PlateRecord] = field(default_factory=list)
    seed: int = 0
    created_by: str = f"platesr {__version__}"
    notes: str = ""

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(ids) != len(set(ids)):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ManifestError(f"duplicate record ids: {dup}")

    def to_json(self) -> str:
        doc = {
            "records": [asdict(r) for r in self.records],
            "seed": self.seed,
            "created_by": self.created_by,
            "notes": self.notes,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}")
        records = []
        for raw in doc.get("records", []):
            box = raw.get("crop_box")
            records.append(
                PlateRecord(
                    id=raw["id"],
                    subset=raw["subset"],
                    hr_path=raw["hr_path"],
                    truth=raw["truth"],
                    crop_box=tuple(box) if box else None,
                    lr_path=raw.get("lr_path"),
                    degradation=raw.get("degradation"),
                )
            )
        return cls(
            records=records,
            seed=int(doc.get("seed", 0)),
            created_by=doc.get("created_by", ""),
            notes=doc.get("notes", ""),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Manifest":
        return cls.from_json(Path(path).read_text())

    def validate_files(self, root) -> list[str]:
        """Return ids whose referenced files are missing."""
        root = Path(root)
        missing = []
        for r in self.records:
            if not (root / r.hr_path).exists():
                missing.append(r.id)
            elif r.lr_path and not (root / r.lr_path).exists():
                missing.append(r.id)
        return missing


def config_hash(cfg: DegradationConfig) -> str:
    return hashlib.sha256(cfg.to_json().encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IngestError:
    line: int
    message: str


def ingest(root_dir, annotations_file) -> tuple[Manifest, list[IngestError]]:
    """Build a manifest from a JSON-lines annotation file.

    Each line holds {"path", "truth", "subset", optional "box" [x,y,w,h],
    optional "id"}. Paths are relative to root_dir. Crops are applied when
    a box is present and written under <root>/hr/. Per-record failures are
    collected as error entries instead of aborting.
    """
    root = Path(root_dir)
    records: list[PlateRecord] = []
    errors: list[IngestError] = []
    seen_ids: set[str] = set()

    with open(annotations_file) as f:
        lines = f.readlines()

    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            ann = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(IngestError(lineno, f"malformed annotation: {exc}"))
            continue
        try:
            path = ann["path"]
            truth = ann["truth"]
            subset = ann.get("subset", "dashcam")
            rec_id = ann.get("id") or Path(path).stem
            if rec_id in seen_ids:
                raise ManifestError(f"duplicate id {rec_id!r}")
            box = ann.get("box")

            src = root / path
            img = read_png(src)
            hr_rel = path
            if box is not None:
                x, y, w, h = (int(v) for v in box)
                if w < 1 or h < 1 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
                    raise InvalidArgumentError(f"crop box {box} outside image bounds")
                crop = ImageF32(img.data[:, y : y + h, x : x + w])
                hr_rel = f"hr/{rec_id}.png"
                (root / "hr").mkdir(parents=True, exist_ok=True)
                write_png(crop, root / hr_rel)
            records.append(
                PlateRecord(id=rec_id, subset=subset, hr_path=hr_rel, truth=truth)
            )
            seen_ids.add(rec_id)
        except KeyError as exc:
            errors.append(IngestError(lineno, f"missing annotation key {exc}"))
        except Exception as exc:
            errors.append(IngestError(lineno, str(exc)))

    return Manifest(records=records), errors


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------


def _random_plate_text(rng, patterns: list[str]) -> str:
    pattern = patterns[int(rng.integers(0, len(patterns)))]
    out = []
    for cls in pattern:
        if cls == "L":
            out.append(chr(ord("A") + int(rng.integers(0, 26))))
        elif cls == "N":
            out.append(chr(ord("0") + int(rng.integers(0, 10))))
        else:
            out.append("-")
    return "".join(out)


def synth_plates(
    n: int,
    seed: int,
    out_dir,
    atlas: FontAtlas | None = None,
    patterns: list[str] | None = None,
    render_scale: int = 1,
) -> Manifest:
    """Render n pattern-conforming plates with light jitter under
    <out_dir>/hr/ and return the manifest (not yet saved)."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    atlas = atlas or builtin_atlas()
    patterns = patterns or DEFAULT_PATTERNS
    out = Path(out_dir)
    (out / "hr").mkdir(parents=True, exist_ok=True)

    records = []
    for i in range(n):
        rec_id = f"synth-{i:04d}"
        rng = rng_mod.stream(seed, rec_id)
        text = _random_plate_text(rng, patterns)
        img = render_plate(text, atlas, scale=render_scale, rng=rng)
        rel = f"hr/{rec_id}.png"
        write_png(img, out / rel)
        records.append(
            PlateRecord(id=rec_id, subset="synthetic", hr_path=rel, truth=text)
        )
    return Manifest(records=records, seed=seed, notes=f"synthetic corpus n={n}")


# ---------------------------------------------------------------------------
# LR pair generation
# ---------------------------------------------------------------------------


def make_lr_pairs(
    m: Manifest, cfg: DegradationConfig, root_dir, jobs: int = 1
) -> Manifest:
    """Degrade every HR image; fills lr_path and the degradation hash.

    Each record's random stream is keyed by (cfg.seed, record id), so
    results are byte-identical for any job count.
    """
    root = Path(root_dir)
    (root / "lr").mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)

    def process(rec: PlateRecord) -> PlateRecord:
        hr = read_png(root / rec.hr_path)
        rng = rng_mod.stream(cfg.seed, rec.id)
        lr = degrade_pipeline(hr, cfg, rng)
        rel = f"lr/{rec.id}.png"
        write_png(lr, root / rel)
        return replace(rec, lr_path=rel, degradation=chash)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            new_records = list(pool.map(process, m.records))
    else:
        new_records = [process(r) for r in m.records]
    return Manifest(
        records=new_records, seed=m.seed, created_by=m.created_by, notes=m.notes
    )


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def split(m: Manifest, train_frac: float, seed: int) -> tuple[Manifest, Manifest]:
    """Deterministic stratified split: shuffles within each subset and
    partitions by train_frac. Outputs are disjoint and exhaustive."""
    if not 0.0 < train_frac < 1.0:
        raise InvalidArgumentError(f"train_frac must be in (0, 1), got {train_frac}")
    train: list[PlateRecord] = []
    test: list[PlateRecord] = []
    for subset in SUBSETS:
        group = [r for r in m.records if r.subset == subset]
        if not group:
            continue
        order = rng_mod.stream(seed, "split", subset).permutation(len(group))
        n_train = int(round(train_frac * len(group)))
        chosen = set(order[:n_train].tolist())
        for i, rec in enumerate(group):
            (train if i in chosen else test).append(rec)
    return (
        Manifest(records=train, seed=seed, notes=f"{m.notes} [train]".strip()),
        Manifest(records=test, seed=seed, notes=f"{m.notes} [test]".strip()),
    )
