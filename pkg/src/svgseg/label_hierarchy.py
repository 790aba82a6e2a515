"""Three-level hierarchical label scheme.

A label map assigns every leaf category a (l1, l2, l3) triple: a coarse
class for the over-represented-vs-rest split, an intermediate semantic
group, and the fine-grained category itself. Maps are plain TSV files so
they can be diffed and audited; two maps ship with the package (a
German-layer floor-plan scheme and the public CAD-symbol scheme).
"""
from __future__ import annotations

import difflib
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Union

log = logging.getLogger(__name__)

OTHERS_NAME = "Others"


class DuplicateLeaf(ValueError):
    """A leaf name or id appears more than once."""


class NonForestHierarchy(ValueError):
    """A leaf is listed under two different parents."""


class SparseIds(ValueError):
    """Level ids are not dense 0..n-1."""


class UnknownLeaf(KeyError):
    def __init__(self, leaf, suggestions):
        self.leaf = leaf
        self.suggestions = suggestions
        hint = f"; closest known: {', '.join(suggestions)}" if suggestions else ""
        super().__init__(f"unknown leaf {leaf!r}{hint}")


@dataclass(frozen=True)
class LabelMap:
    by_name: Mapping[str, tuple[int, int, int]]
    by_id: Mapping[int, str]          # leaf_id -> name
    level_sizes: tuple[int, int, int]
    provenance: str = ""

    @property
    def leaf_count(self) -> int:
        return self.level_sizes[2]

    def names_in_l3_order(self) -> list[str]:
        order = sorted(self.by_name.items(), key=lambda kv: kv[1][2])
        return [name for name, _ in order]


def _validate(rows: list[tuple[int, str, int, int, int]], provenance: str) -> LabelMap:
    by_name: dict[str, tuple[int, int, int]] = {}
    by_id: dict[int, str] = {}
    l3_parent: dict[int, tuple[int, int]] = {}
    l2_parent: dict[int, int] = {}
    for leaf_id, name, l1, l2, l3 in rows:
        if name in by_name:
            raise DuplicateLeaf(name)
        if leaf_id in by_id:
            raise DuplicateLeaf(f"leaf id {leaf_id}")
        if l3 in l3_parent and l3_parent[l3] != (l1, l2):
            raise NonForestHierarchy(
                f"l3={l3} listed under both {l3_parent[l3]} and {(l1, l2)}")
        if l3 in l3_parent:
            raise DuplicateLeaf(f"l3 id {l3}")
        l3_parent[l3] = (l1, l2)
        if l2 in l2_parent and l2_parent[l2] != l1:
            # Real-world schemes reuse the catch-all l2 id under several l1
            # classes; warn instead of refusing to load.
            log.warning("%s: l2=%d appears under l1=%d and l1=%d",
                        provenance, l2, l2_parent[l2], l1)
        else:
            l2_parent[l2] = l1
        by_name[name] = (l1, l2, l3)
        by_id[leaf_id] = name

    for level, ids in (("l1", {r[2] for r in rows}), ("l2", {r[3] for r in rows}),
                       ("l3", {r[4] for r in rows})):
        if ids != set(range(len(ids))):
            raise SparseIds(f"{level} ids are not dense 0..{len(ids) - 1}: "
                            f"{sorted(ids)}")
    sizes = (len({r[2] for r in rows}), len({r[3] for r in rows}),
             len({r[4] for r in rows}))
    return LabelMap(by_name, by_id, sizes, provenance)


def load_label_map(source: Union[str, Path]) -> LabelMap:
    """Read a TSV label map: leaf_id, name, l1, l2, l3 (one leaf per line,
    '#' comments allowed)."""
    path = Path(source)
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields, "
                             f"got {len(parts)}")
        leaf_id, name, l1, l2, l3 = parts
        rows.append((int(leaf_id), name, int(l1), int(l2), int(l3)))
    if not rows:
        raise ValueError(f"{path}: empty label map")
    return _validate(rows, provenance=path.stem)


def builtin_label_map(name: str) -> LabelMap:
    """Load one of the shipped maps: 'tum', 'floorplancad' or 'synthetic'."""
    fname = {"tum": "tum_labels.tsv", "floorplancad": "floorplancad_labels.tsv",
             "synthetic": "synthetic_labels.tsv"}[name]
    with resources.as_file(resources.files("svgseg.data").joinpath(fname)) as p:
        return load_label_map(p)


def aggregate_rare(layer_occurrence: Mapping[str, int], total_drawings: int,
                   threshold: float = 1 / 3) -> dict[str, str]:
    """Rename map sending layers present in fewer than `threshold` of all
    drawings to the catch-all class; everything else maps to itself."""
    if total_drawings < 1:
        raise ValueError("total_drawings must be >= 1")
    out = {}
    for layer, count in layer_occurrence.items():
        rare = count / total_drawings < threshold
        out[layer] = OTHERS_NAME if rare else layer
    return out


def map_leaf(leaf: Union[str, int], label_map: LabelMap) -> tuple[int, int, int]:
    """Resolve a leaf name or id to its (l1, l2, l3) triple."""
    if isinstance(leaf, int):
        name = label_map.by_id.get(leaf)
        if name is None:
            raise UnknownLeaf(leaf, [])
        return label_map.by_name[name]
    triple = label_map.by_name.get(leaf)
    if triple is None:
        suggestions = difflib.get_close_matches(leaf, label_map.by_name, n=3)
        raise UnknownLeaf(leaf, suggestions)
    return triple
