"""Loading regions and observations, spatial join, and cleaning filters.

Coordinates are treated as planar lon/lat; no reprojection is done.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import shape

logger = logging.getLogger(__name__)

DEFAULT_ID_KEY = "CODE_IRIS"
DEFAULT_PRICE_CAP = 20_000.0


class IngestError(ValueError):
    """Raised on malformed or inconsistent input files."""


@dataclass(frozen=True)
class RegionSet:
    """Polygons keyed by region id, plus the remaining feature properties."""

    geometries: dict
    attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.geometries:
            raise IngestError("region set is empty")
        for rid in self.geometries:
            if not isinstance(rid, str) or not rid:
                raise IngestError(f"invalid region id {rid!r}")

    def __len__(self):
        return len(self.geometries)

    def __contains__(self, rid):
        return rid in self.geometries

    @property
    def ids(self):
        """Region ids in lexicographic order (the canonical node order)."""
        return tuple(sorted(self.geometries))

    def attribute(self, name):
        """Map region id -> value of property ``name`` (regions lacking it are skipped)."""
        return {
            rid: attrs[name]
            for rid, attrs in self.attributes.items()
            if name in attrs and attrs[name] is not None
        }


@dataclass(frozen=True)
class RawRecord:
    row: int
    z_true: float
    z_pred: float
    lon: float = math.nan
    lat: float = math.nan
    region_id: str | None = None


@dataclass(frozen=True)
class ObservationSchema:
    """Column names in the observation CSV.

    When ``region_id`` is set the coordinates are not read.
    """

    z_true: str = "z_true"
    z_pred: str = "z_pred"
    lon: str = "lon"
    lat: str = "lat"
    region_id: str | None = None


@dataclass(frozen=True, eq=False)
class ObservationTable:
    """Observations joined to regions. Arrays are aligned row-wise."""

    region_id: np.ndarray
    z_true: np.ndarray
    z_pred: np.ndarray
    row: np.ndarray
    n_loaded: int
    n_dropped_outside: int = 0
    n_dropped_outlier: int = 0
    n_dropped_excluded: int = 0
    warnings: tuple = ()

    def __len__(self):
        return len(self.z_true)

    def take(self, mask):
        return replace(
            self,
            region_id=self.region_id[mask],
            z_true=self.z_true[mask],
            z_pred=self.z_pred[mask],
            row=self.row[mask],
        )

    def summary(self):
        return {
            "n_loaded": self.n_loaded,
            "n_retained": len(self),
            "n_dropped_outside": self.n_dropped_outside,
            "n_dropped_outlier": self.n_dropped_outlier,
            "n_dropped_excluded": self.n_dropped_excluded,
            "warnings": list(self.warnings),
        }


def _close_rings(geom):
    # GeoJSON requires closed rings; close any that are not
    def close(ring):
        ring = [list(pt) for pt in ring]
        if ring and ring[0] != ring[-1]:
            ring.append(ring[0])
        return ring

    if geom["type"] == "Polygon":
        coords = [close(r) for r in geom["coordinates"]]
    else:
        coords = [[close(r) for r in poly] for poly in geom["coordinates"]]
    return {"type": geom["type"], "coordinates": coords}


def parse_regions(collection, id_key=DEFAULT_ID_KEY):
    """Build a :class:`RegionSet` from an already-decoded FeatureCollection."""
    if not isinstance(collection, dict) or collection.get("type") != "FeatureCollection":
        raise IngestError("regions file is not a GeoJSON FeatureCollection")
    features = collection.get("features") or []
    if not features:
        raise IngestError("regions FeatureCollection is empty")
    geometries, attributes = {}, {}
    for idx, feat in enumerate(features):
        props = feat.get("properties") or {}
        if id_key not in props or props[id_key] in (None, ""):
            raise IngestError(f"feature {idx}: missing id property {id_key!r}")
        rid = str(props[id_key])
        if rid in geometries:
            raise IngestError(f"feature {idx}: duplicate region id {rid!r}")
        geom = feat.get("geometry")
        if not geom or geom.get("type") not in ("Polygon", "MultiPolygon"):
            raise IngestError(f"feature {idx}: geometry must be Polygon or MultiPolygon")
        try:
            poly = shape(_close_rings(geom))
        except Exception as exc:
            raise IngestError(f"feature {idx}: unreadable geometry ({exc})") from exc
        if poly.is_empty or not poly.is_valid:
            reason = shapely.is_valid_reason(poly)
            raise IngestError(f"feature {idx}: invalid geometry for {rid!r} ({reason})")
        geometries[rid] = poly
        attributes[rid] = {k: v for k, v in props.items() if k != id_key}
    return RegionSet(geometries, attributes)


def load_regions(path, id_key=DEFAULT_ID_KEY):
    path = Path(path)
    try:
        collection = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: not valid JSON ({exc})") from exc
    return parse_regions(collection, id_key)


def _number(text, col, row):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise IngestError(f"row {row}: column {col!r} is not numeric ({text!r})") from None
    if not math.isfinite(value):
        raise IngestError(f"row {row}: column {col!r} is not finite ({text!r})")
    return value


def load_observations(path, schema=ObservationSchema()):
    """Parse the observation CSV into :class:`RawRecord` objects (no filtering).

    Row numbers count the header as row 1, so the first data row is row 2.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise IngestError(f"{path}: empty file")
        needed = [schema.z_true, schema.z_pred]
        needed += [schema.region_id] if schema.region_id else [schema.lon, schema.lat]
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"{path}: missing column(s) {', '.join(missing)}")
        records = []
        for row_no, row in enumerate(reader, start=2):
            z_true = _number(row[schema.z_true], schema.z_true, row_no)
            z_pred = _number(row[schema.z_pred], schema.z_pred, row_no)
            if z_true <= 0 or z_pred <= 0:
                raise IngestError(f"row {row_no}: prices must be strictly positive")
            if schema.region_id:
                rid = (row[schema.region_id] or "").strip()
                if not rid:
                    raise IngestError(f"row {row_no}: empty region id")
                records.append(RawRecord(row_no, z_true, z_pred, region_id=rid))
            else:
                lon = _number(row[schema.lon], schema.lon, row_no)
                lat = _number(row[schema.lat], schema.lat, row_no)
                records.append(RawRecord(row_no, z_true, z_pred, lon=lon, lat=lat))
    if not records:
        raise IngestError(f"{path}: no data rows")
    return records


def spatial_join(records, regions):
    """Assign each record to a region and build an :class:`ObservationTable`.

    Points on a shared boundary go to the lexicographically smallest id.
    Records carrying explicit region ids are validated instead of joined.
    """
    ids = regions.ids
    assigned = [r.region_id for r in records]

    explicit = [i for i, r in enumerate(records) if r.region_id is not None]
    unknown = sorted({records[i].region_id for i in explicit} - set(ids))
    if unknown:
        raise IngestError(f"unknown region id(s): {', '.join(unknown)}")

    located = [i for i, r in enumerate(records) if r.region_id is None]
    if located:
        tree = shapely.STRtree([regions.geometries[rid] for rid in ids])
        points = shapely.points([(records[i].lon, records[i].lat) for i in located])
        # "intersects" on a point includes the polygon boundary
        pt_idx, geom_idx = tree.query(points, predicate="intersects")
        best = np.full(len(located), len(ids), dtype=np.int64)
        np.minimum.at(best, pt_idx, geom_idx)
        for j, i in enumerate(located):
            if best[j] < len(ids):
                assigned[i] = ids[best[j]]

    keep = [i for i, rid in enumerate(assigned) if rid is not None]
    return ObservationTable(
        region_id=np.array([assigned[i] for i in keep], dtype=object),
        z_true=np.array([records[i].z_true for i in keep], dtype=np.float64),
        z_pred=np.array([records[i].z_pred for i in keep], dtype=np.float64),
        row=np.array([records[i].row for i in keep], dtype=np.int64),
        n_loaded=len(records),
        n_dropped_outside=len(records) - len(keep),
    )


def clean(table, price_cap=DEFAULT_PRICE_CAP, exclude=()):
    """Drop outliers above ``price_cap`` (inclusive cap) and excluded regions."""
    if not price_cap > 0:
        raise ValueError("price_cap must be positive")
    exclude = set(exclude)
    in_excluded = np.array([rid in exclude for rid in table.region_id], dtype=bool)
    outlier = (table.z_true > price_cap) & ~in_excluded
    keep = ~(outlier | in_excluded)
    out = replace(
        table.take(keep),
        n_dropped_outlier=table.n_dropped_outlier + int(outlier.sum()),
        n_dropped_excluded=table.n_dropped_excluded + int(in_excluded.sum()),
    )
    if len(out) == 0:
        logger.warning("cleaning removed every observation")
        out = replace(out, warnings=out.warnings + ("no observations left after cleaning",))
    return out
