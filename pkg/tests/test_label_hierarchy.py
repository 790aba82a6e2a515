import pytest

from svgseg.label_hierarchy import (
    DuplicateLeaf,
    LabelMap,
    NonForestHierarchy,
    SparseIds,
    UnknownLeaf,
    aggregate_rare,
    builtin_label_map,
    load_label_map,
    map_leaf,
)


def write_map(tmp_path, rows):
    text = "\n".join("\t".join(str(v) for v in row) for row in rows)
    p = tmp_path / "labels.tsv"
    p.write_text(text + "\n", encoding="utf-8")
    return p


def test_tum_map_known_rows():
    m = builtin_label_map("tum")
    assert map_leaf("A_00_RASTER", m) == (2, 11, 1)
    assert map_leaf("Others", m) == (0, 0, 0)
    assert map_leaf("A_013_TUER", m) == (1, 2, 5)
    assert map_leaf("A_01_TRAGWAND", m) == (1, 1, 2)


def test_tum_map_cardinalities():
    m = builtin_label_map("tum")
    assert m.level_sizes == (3, 12, 43)
    # Grid is the only leaf with the reserved coarse class 2.
    grids = [n for n, t in m.by_name.items() if t[0] == 2]
    assert grids == ["A_00_RASTER"]


def test_floorplancad_map():
    m = builtin_label_map("floorplancad")
    assert m.level_sizes[2] == 36
    assert map_leaf("wall", m)[0] == 1
    assert map_leaf("other", m)[0] == 0
    assert map_leaf(0, m) == map_leaf("single door", m)


def test_synthetic_map():
    m = builtin_label_map("synthetic")
    assert m.level_sizes == (2, 4, 6)


def test_map_is_forest_consistent():
    for name in ("tum", "floorplancad", "synthetic"):
        m = builtin_label_map(name)
        l3_to_l2 = {}
        for l1, l2, l3 in m.by_name.values():
            assert l3_to_l2.setdefault(l3, l2) == l2
        assert len(l3_to_l2) == m.level_sizes[2]


def test_duplicate_leaf(tmp_path):
    p = write_map(tmp_path, [(0, "a", 0, 0, 0), (1, "a", 0, 0, 1)])
    with pytest.raises(DuplicateLeaf):
        load_label_map(p)


def test_non_forest(tmp_path):
    # Same fine class listed under two different intermediate parents.
    p = write_map(tmp_path, [(0, "a", 0, 0, 0), (1, "b", 0, 1, 0)])
    with pytest.raises(NonForestHierarchy):
        load_label_map(p)


def test_sparse_ids(tmp_path):
    p = write_map(tmp_path, [(0, "a", 0, 0, 0), (1, "b", 0, 0, 5)])
    with pytest.raises(SparseIds):
        load_label_map(p)


def test_aggregate_rare_threshold():
    occ = {"layer_rare": 20, "layer_mid": 40, "layer_common": 76}
    renames = aggregate_rare(occ, 76)
    assert renames["layer_rare"] == "Others"      # 26% < 33%
    assert renames["layer_mid"] == "layer_mid"    # 53%
    assert renames["layer_common"] == "layer_common"


def test_aggregate_threshold_zero_identity():
    occ = {"a": 1, "b": 2}
    assert aggregate_rare(occ, 100, threshold=0) == {"a": "a", "b": "b"}


def test_aggregate_strict_less_than():
    # Exactly at the threshold stays itself ("fewer than" is strict).
    assert aggregate_rare({"x": 1}, 3, threshold=1 / 3)["x"] == "x"


def test_unknown_leaf_suggests():
    m = builtin_label_map("tum")
    with pytest.raises(UnknownLeaf) as exc:
        map_leaf("A_013_TEUR", m)
    assert any("TUER" in s for s in exc.value.suggestions)
