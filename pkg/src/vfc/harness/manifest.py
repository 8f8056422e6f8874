"""Dataset manifests: JSONL files naming items and their image files.

2D entries:  {"item_id": "x", "image": "imgs/x.png", "gt_captions": [...]}
3D entries:  {"item_id": "x", "views": [{"path": "x/v0.png", "azimuth": 0,
              "elevation": 0}, ...], "gt_captions": [...]}

Relative paths resolve against the manifest's directory. Validation is
exhaustive: every missing file and duplicate id is reported, not just the
first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from vfc.errors import DuplicateIds, MissingFiles, SchemaError
from vfc.gateway import ImageRef
from vfc.pipeline3d import ObjectViews, ViewSpec

KIND_2D = "images2d"
KIND_3D = "objects3d"


@dataclass
class ManifestEntry:
    item_id: str
    image_path: str | None = None
    views: list[dict] = field(default_factory=list)  # {"path", "azimuth", "elevation"}
    gt_captions: list[str] = field(default_factory=list)

    def image_ref(self) -> ImageRef:
        return ImageRef(id=self.item_id, path=self.image_path)

    def object_views(self) -> ObjectViews:
        return ObjectViews(
            object_id=self.item_id,
            views=[
                ViewSpec(
                    view_id=f"{self.item_id}/view{i}",
                    image=ImageRef(id=f"{self.item_id}/view{i}", path=v["path"]),
                    azimuth_deg=float(v.get("azimuth", 0.0)),
                    elevation_deg=float(v.get("elevation", 0.0)),
                )
                for i, v in enumerate(self.views)
            ],
        )


@dataclass
class Manifest:
    kind: str
    entries: list[ManifestEntry]
    path: str

    def __len__(self) -> int:
        return len(self.entries)


def _parse_entry(data: dict, line_no: int, root: Path) -> tuple[str, ManifestEntry]:
    if not isinstance(data, dict):
        raise SchemaError(line_no, "entry is not a JSON object")
    item_id = data.get("item_id")
    if not isinstance(item_id, str) or not item_id:
        raise SchemaError(line_no, "missing or invalid item_id")
    has_image = "image" in data
    has_views = "views" in data
    if has_image == has_views:
        raise SchemaError(line_no, "entry must set exactly one of 'image' or 'views'")
    gt_captions = data.get("gt_captions", [])
    if not isinstance(gt_captions, list) or not all(isinstance(c, str) for c in gt_captions):
        raise SchemaError(line_no, "gt_captions must be a list of strings")
    if has_image:
        if not isinstance(data["image"], str) or not data["image"]:
            raise SchemaError(line_no, "'image' must be a non-empty path")
        return KIND_2D, ManifestEntry(
            item_id=item_id,
            image_path=str(root / data["image"]),
            gt_captions=gt_captions,
        )
    views = data["views"]
    if not isinstance(views, list) or not views:
        raise SchemaError(line_no, "'views' must be a non-empty list")
    parsed_views = []
    for view in views:
        if not isinstance(view, dict) or not isinstance(view.get("path"), str):
            raise SchemaError(line_no, "each view needs a 'path'")
        parsed_views.append(
            {
                "path": str(root / view["path"]),
                "azimuth": float(view.get("azimuth", 0.0)),
                "elevation": float(view.get("elevation", 0.0)),
            }
        )
    return KIND_3D, ManifestEntry(item_id=item_id, views=parsed_views, gt_captions=gt_captions)


def load_manifest(path: str | Path) -> Manifest:
    """Parse and validate a manifest; raises SchemaError / DuplicateIds / MissingFiles."""
    path = Path(path)
    root = path.parent
    entries: list[ManifestEntry] = []
    kinds: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(line_no, f"invalid JSON: {exc}") from exc
            kind, entry = _parse_entry(data, line_no, root)
            kinds.add(kind)
            if len(kinds) > 1:
                raise SchemaError(line_no, "manifest mixes 2D and 3D entries")
            entries.append(entry)
    if not entries:
        raise SchemaError(0, "manifest is empty")

    seen: set[str] = set()
    duplicates: list[str] = []
    for entry in entries:
        if entry.item_id in seen and entry.item_id not in duplicates:
            duplicates.append(entry.item_id)
        seen.add(entry.item_id)
    if duplicates:
        raise DuplicateIds(duplicates)

    missing: list[str] = []
    for entry in entries:
        paths = [entry.image_path] if entry.image_path else [v["path"] for v in entry.views]
        missing.extend(p for p in paths if not Path(p).is_file())
    if missing:
        raise MissingFiles(missing)

    return Manifest(kind=kinds.pop(), entries=entries, path=str(path))
