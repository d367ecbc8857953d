"""Dataset manifests: JSON-lines ingestion, validation and VOC XML import.

Canonical manifest format is JSON-lines, one image per line:

    {"id": "train_0001", "path": "images/train_0001.png", "width": 128,
     "height": 128,
     "boxes": [{"x1": 10.0, "y1": 8.0, "x2": 52.0, "y2": 90.0,
                "difficult": false, "style": "filled"}]}

Boxes use corner coordinates with x2 > x1, y2 > y1 and must lie within the
image. An importer converts VOC-style XML annotation directories (one XML
per image, person objects only) into this format; the style label is taken
from the XML <folder> element when present.
"""

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

SPLITS = ("train", "val", "trainval", "test")


@dataclass
class Annotation:
    box: np.ndarray  # (4,) x1, y1, x2, y2
    difficult: bool = False
    style: str = "unknown"

    def to_dict(self):
        x1, y1, x2, y2 = (float(v) for v in self.box)
        return {"x1": x1, "y1": y1, "x2": x2, "y2": y2,
                "difficult": bool(self.difficult), "style": self.style}


@dataclass
class ImageEntry:
    id: str
    path: str
    width: int
    height: int
    annotations: list

    def to_dict(self):
        return {"id": self.id, "path": self.path, "width": self.width,
                "height": self.height,
                "boxes": [a.to_dict() for a in self.annotations]}


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    split: str = "train"

    @property
    def style_vocabulary(self):
        return sorted({a.style for e in self.entries for a in e.annotations})

    def __len__(self):
        return len(self.entries)

    def by_id(self):
        return {e.id: e for e in self.entries}

    def num_gt(self, include_difficult=False):
        return sum(
            1 for e in self.entries for a in e.annotations
            if include_difficult or not a.difficult
        )


def _validate_entry(entry, source):
    if not entry.path:
        raise DataError(f"{source}: empty image path")
    for a in entry.annotations:
        x1, y1, x2, y2 = (float(v) for v in a.box)
        if not all(np.isfinite(v) for v in (x1, y1, x2, y2)):
            raise DataError(f"{source}: image {entry.id!r} has a non-finite box")
        if x2 <= x1 or y2 <= y1:
            raise DataError(
                f"{source}: image {entry.id!r} has a degenerate box "
                f"({x1}, {y1}, {x2}, {y2})"
            )
        if x1 < 0 or y1 < 0 or x2 > entry.width or y2 > entry.height:
            raise DataError(
                f"{source}: image {entry.id!r} has a box outside its "
                f"{entry.width}x{entry.height} bounds"
            )


def _parse_line(line, lineno, source):
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"{source}:{lineno}: malformed JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise DataError(f"{source}:{lineno}: expected a JSON object per line")
    try:
        boxes = [
            Annotation(
                box=np.array([b["x1"], b["y1"], b["x2"], b["y2"]], dtype=np.float64),
                difficult=bool(b.get("difficult", False)),
                style=str(b.get("style", "unknown")),
            )
            for b in doc.get("boxes", [])
        ]
        entry = ImageEntry(
            id=str(doc.get("id") or Path(doc["path"]).stem),
            path=str(doc["path"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            annotations=boxes,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{source}:{lineno}: missing or invalid field ({exc})") from None
    return entry


def load_manifest(path, split="train", style_vocabulary=None):
    """Load and validate a JSON-lines manifest; empty file -> empty manifest."""
    source = str(path)
    entries = []
    seen_paths = set()
    seen_ids = set()
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            entry = _parse_line(line, lineno, source)
            _validate_entry(entry, f"{source}:{lineno}")
            if entry.path in seen_paths:
                raise DataError(f"{source}:{lineno}: duplicate image path {entry.path!r}")
            if entry.id in seen_ids:
                raise DataError(f"{source}:{lineno}: duplicate image id {entry.id!r}")
            seen_paths.add(entry.path)
            seen_ids.add(entry.id)
            if style_vocabulary is not None:
                for a in entry.annotations:
                    if a.style not in style_vocabulary:
                        raise DataError(
                            f"{source}:{lineno}: style {a.style!r} not in the "
                            f"declared vocabulary"
                        )
            entries.append(entry)
    return DatasetManifest(entries=entries, split=split)


def save_manifest(manifest, path):
    """Write a manifest as canonical JSON-lines (stable key order)."""
    with open(path, "w") as f:
        for entry in manifest.entries:
            f.write(json.dumps(entry.to_dict()) + "\n")


def import_voc_directory(xml_dir, split="train", class_name="person"):
    """Convert a directory of VOC-style XML annotations into a manifest.

    One XML file per image; only objects named ``class_name`` are kept. The
    depiction style is read from the <folder> element when present.
    """
    xml_dir = Path(xml_dir)
    files = sorted(xml_dir.glob("*.xml"))
    entries = []
    for xml_path in files:
        try:
            root = ET.parse(xml_path).getroot()
        except ET.ParseError as exc:
            raise DataError(f"{xml_path}: invalid XML ({exc})") from None
        filename = root.findtext("filename") or xml_path.stem
        style = (root.findtext("folder") or "unknown").strip() or "unknown"
        size = root.find("size")
        if size is None:
            raise DataError(f"{xml_path}: missing <size> element")
        width = int(float(size.findtext("width")))
        height = int(float(size.findtext("height")))
        boxes = []
        for obj in root.iter("object"):
            if (obj.findtext("name") or "").strip() != class_name:
                continue
            bnd = obj.find("bndbox")
            if bnd is None:
                raise DataError(f"{xml_path}: object without <bndbox>")
            box = np.array(
                [float(bnd.findtext(k)) for k in ("xmin", "ymin", "xmax", "ymax")]
            )
            difficult = (obj.findtext("difficult") or "0").strip() == "1"
            boxes.append(Annotation(box=box, difficult=difficult, style=style))
        entry = ImageEntry(id=Path(filename).stem, path=filename, width=width,
                           height=height, annotations=boxes)
        _validate_entry(entry, str(xml_path))
        entries.append(entry)
    return DatasetManifest(entries=entries, split=split)
