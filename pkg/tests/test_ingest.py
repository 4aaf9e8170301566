import numpy as np
import pytest
from conftest import collection, feature, square
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import inside_convex

from geofair.ingest import (
    IngestError,
    ObservationSchema,
    RawRecord,
    clean,
    load_observations,
    load_regions,
    parse_regions,
    spatial_join,
)


@pytest.fixture
def two_squares():
    return parse_regions(collection(feature("a", square(0, 0)), feature("b", square(1, 0))))


def test_load_two_disjoint_squares(write_json):
    path = write_json(collection(feature("a", square(0, 0)), feature("b", square(3, 0))))
    regions = load_regions(path)
    assert len(regions) == 2
    assert regions.ids == ("a", "b")


def test_load_many_features(write_json):
    feats = [feature(f"{i:04d}", square(i % 30 * 2, i // 30 * 2)) for i in range(878)]
    assert len(load_regions(write_json(collection(*feats)))) == 878


def test_missing_id_names_feature_index(write_json):
    bad = feature("b", square(1, 0))
    del bad["properties"]["CODE_IRIS"]
    with pytest.raises(IngestError, match="feature 1"):
        load_regions(write_json(collection(feature("a", square(0, 0)), bad)))


def test_duplicate_id(write_json):
    with pytest.raises(IngestError, match="feature 1: duplicate"):
        load_regions(write_json(collection(feature("a", square(0, 0)), feature("a", square(2, 0)))))


def test_empty_collection(write_json):
    with pytest.raises(IngestError, match="empty"):
        load_regions(write_json(collection()))


def test_not_json(tmp_path):
    path = tmp_path / "x.geojson"
    path.write_text("{nope")
    with pytest.raises(IngestError, match="not valid JSON"):
        load_regions(path)


def test_custom_id_key_and_attributes(write_json):
    path = write_json(collection(feature("a", square(0, 0), key="id", parent="p1")))
    regions = load_regions(path, id_key="id")
    assert regions.attribute("parent") == {"a": "p1"}


def test_unclosed_ring_is_repaired():
    ring = square(0, 0)[:-1]
    regions = parse_regions(collection(feature("a", ring)))
    assert regions.geometries["a"].area == pytest.approx(1.0)


def test_self_intersecting_polygon_rejected():
    bowtie = [[0, 0], [1, 1], [1, 0], [0, 1], [0, 0]]
    with pytest.raises(IngestError, match="feature 0: invalid geometry"):
        parse_regions(collection(feature("a", bowtie)))


def test_multipolygon_preserved():
    multi = {
        "type": "Feature",
        "properties": {"CODE_IRIS": "m"},
        "geometry": {"type": "MultiPolygon", "coordinates": [[square(0, 0)], [square(5, 5)]]},
    }
    regions = parse_regions(collection(multi))
    assert regions.geometries["m"].geom_type == "MultiPolygon"


def test_load_observations_lonlat(write_csv):
    path = write_csv("lon,lat,z_true,z_pred\n0.5,0.5,100,110\n1.5,0.5,200,190\n9,9,50,50\n")
    records = load_observations(path)
    assert len(records) == 3
    assert records[0] == RawRecord(2, 100.0, 110.0, lon=0.5, lat=0.5)


def test_non_numeric_reports_row(write_csv):
    path = write_csv("lon,lat,z_true,z_pred\n0.5,0.5,100,110\n0.5,0.5,100,abc\n")
    with pytest.raises(IngestError, match="row 3"):
        load_observations(path)


def test_region_id_schema(write_csv):
    path = write_csv("iris,price,estimate\na,100,90\nb,120,130\n")
    schema = ObservationSchema(z_true="price", z_pred="estimate", region_id="iris")
    records = load_observations(path, schema)
    assert [r.region_id for r in records] == ["a", "b"]


def test_missing_column(write_csv):
    with pytest.raises(IngestError, match="missing column"):
        load_observations(write_csv("lon,lat,z_true\n0,0,1\n"))


def test_empty_file(write_csv):
    with pytest.raises(IngestError, match="empty"):
        load_observations(write_csv(""))
    with pytest.raises(IngestError, match="no data rows"):
        load_observations(write_csv("lon,lat,z_true,z_pred\n"))


def test_join_inside_outside_and_shared_edge(two_squares):
    records = [
        RawRecord(2, 1.0, 1.0, lon=0.5, lat=0.5),
        RawRecord(3, 1.0, 1.0, lon=5.0, lat=5.0),
        RawRecord(4, 1.0, 1.0, lon=1.0, lat=0.5),
    ]
    table = spatial_join(records, two_squares)
    assert list(table.region_id) == ["a", "a"]
    assert list(table.row) == [2, 4]
    assert table.n_dropped_outside == 1


def test_join_tie_break_independent_of_feature_order():
    fwd = parse_regions(collection(feature("b", square(1, 0)), feature("a", square(0, 0))))
    rec = [RawRecord(2, 1.0, 1.0, lon=1.0, lat=1.0)]
    assert spatial_join(rec, fwd).region_id[0] == "a"


def test_join_explicit_ids_validated(two_squares):
    table = spatial_join([RawRecord(2, 1.0, 1.0, region_id="b")], two_squares)
    assert table.region_id[0] == "b"
    with pytest.raises(IngestError, match="zz"):
        spatial_join([RawRecord(2, 1.0, 1.0, region_id="zz")], two_squares)


def test_join_deterministic(two_squares):
    rng = np.random.default_rng(3)
    recs = [RawRecord(i, 1.0, 1.0, lon=x, lat=y) for i, (x, y) in enumerate(rng.uniform(-0.5, 2.5, (50, 2)))]
    a, b = spatial_join(recs, two_squares), spatial_join(recs, two_squares)
    assert list(a.region_id) == list(b.region_id)


@pytest.mark.parametrize("seed", range(10))
def test_join_matches_half_plane_oracle(seed):
    rng = np.random.default_rng(seed)
    polys = {}
    for i in range(4):
        # random triangle inside its own 2x2 cell, stored counter-clockwise
        ox, oy = 2 * (i % 2), 2 * (i // 2)
        pts = rng.uniform(0.1, 1.9, size=(3, 2)) + [ox, oy]
        cross = (pts[1, 0] - pts[0, 0]) * (pts[2, 1] - pts[0, 1]) - (pts[1, 1] - pts[0, 1]) * (pts[2, 0] - pts[0, 0])
        if cross < 0:
            pts = pts[::-1]
        polys[f"t{i}"] = [tuple(p) for p in pts]
    regions = parse_regions(
        collection(*[feature(k, [list(p) for p in v] + [list(v[0])]) for k, v in polys.items()])
    )
    points = rng.uniform(0, 4, size=(50, 2))
    table = spatial_join([RawRecord(i, 1.0, 1.0, lon=x, lat=y) for i, (x, y) in enumerate(points)], regions)
    got = dict(zip(table.row.tolist(), table.region_id))
    for i, pt in enumerate(points):
        hits = sorted(k for k, v in polys.items() if inside_convex(tuple(pt), v))
        assert got.get(i) == (hits[0] if hits else None)


def _table(z_true, regions=None):
    z_true = np.asarray(z_true, dtype=float)
    from geofair.ingest import ObservationTable

    return ObservationTable(
        region_id=np.array(regions or ["a"] * len(z_true), dtype=object),
        z_true=z_true,
        z_pred=z_true.copy(),
        row=np.arange(len(z_true)),
        n_loaded=len(z_true),
    )


def test_clean_cap_is_inclusive():
    out = clean(_table([25_000, 20_000, 5_000]))
    assert out.z_true.tolist() == [20_000, 5_000]
    assert out.n_dropped_outlier == 1


def test_clean_exclusion_list():
    out = clean(_table([10, 20, 30], ["a", "c", "c"]), exclude=["c"])
    assert out.region_id.tolist() == ["a"]
    assert out.n_dropped_excluded == 2


def test_clean_empty_result_warns():
    out = clean(_table([30_000]))
    assert len(out) == 0 and out.warnings


def test_clean_rejects_bad_cap():
    with pytest.raises(ValueError):
        clean(_table([1.0]), price_cap=0)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(1, 40_000), min_size=1, max_size=40),
    st.lists(st.sampled_from("abc"), min_size=40, max_size=40),
    st.floats(1, 40_000),
)
def test_conservation(prices, regions, cap):
    table = _table(prices, regions[: len(prices)])
    table = type(table)(**{**table.__dict__, "n_loaded": len(prices) + 3, "n_dropped_outside": 3})
    out = clean(table, cap, exclude=["b"])
    assert out.n_loaded == len(out) + out.n_dropped_outside + out.n_dropped_outlier + out.n_dropped_excluded
