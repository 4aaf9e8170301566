"""Synthetic grid cities with a planted, spatially localised prediction bias.

Cells are unit squares, so the queen-contiguity graph is known exactly:
an interior cell has 8 neighbours and hop distance equals Chebyshev
distance between cells. Prices follow a radial surface (highest at the
city centre) with multiplicative log-normal noise, so every quadrant has
the same price distribution. Predictions equal the true price times
``factor`` inside the biased zone, times ``1 + model_noise * N(0, 1)``
everywhere.
"""

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from shapely.geometry import box

from .ingest import ObservationTable, RegionSet
from .outputs import atomic_write_csv, atomic_write_text, dump_json

QUADRANTS = ("sw", "se", "nw", "ne")


@dataclass(frozen=True)
class SynthConfig:
    rows: int = 20
    cols: int = 20
    base_price: float = 10_000.0
    amplitude: float = 0.1
    price_noise: float = 0.15
    model_noise: float = 0.03
    bias_zone: str = "quadrant"  # "quadrant", "ball" or "none"
    bias_quadrant: str = "sw"
    bias_center: tuple | None = None  # (row, col); defaults to the middle cell
    bias_radius: int = 1
    factor: float = 0.85
    obs_per_region: int = 30
    vary_density: bool = True
    district_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError("grid must be at least 2x2")
        if not self.factor > 0:
            raise ValueError("bias factor must be positive")
        if self.bias_zone not in ("quadrant", "ball", "none"):
            raise ValueError(f"unknown bias zone {self.bias_zone!r}")
        if self.bias_quadrant not in QUADRANTS:
            raise ValueError(f"quadrant must be one of {QUADRANTS}")
        if self.obs_per_region < 1 or self.district_size < 1 or self.bias_radius < 0:
            raise ValueError("obs_per_region, district_size must be >= 1, bias_radius >= 0")
        if self.amplitude < 0 or self.price_noise < 0 or self.model_noise < 0:
            raise ValueError("amplitude and noise scales must be non-negative")
        if self.bias_center is not None:
            object.__setattr__(self, "bias_center", tuple(int(v) for v in self.bias_center))
            r, c = self.bias_center
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ValueError("bias_center outside the grid")

    @property
    def center_cell(self):
        if self.bias_center is not None:
            return self.bias_center
        return (self.rows // 2, self.cols // 2)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class City:
    config: SynthConfig
    regions: RegionSet
    observations: ObservationTable
    lon: np.ndarray
    lat: np.ndarray
    biased: frozenset


def cell_id(row, col):
    return f"r{row:03d}c{col:03d}"


def _in_zone(cfg, r, c):
    if cfg.bias_zone == "none":
        return False
    if cfg.bias_zone == "ball":
        cr, cc = cfg.center_cell
        return max(abs(r - cr), abs(c - cc)) <= cfg.bias_radius
    south = r < cfg.rows / 2
    west = c < cfg.cols / 2
    return {"sw": south and west, "se": south and not west,
            "nw": not south and west, "ne": not south and not west}[cfg.bias_quadrant]


def generate_city(cfg=SynthConfig()):
    """Build regions, observations and the set of biased region ids."""
    rng = np.random.default_rng(cfg.seed)
    geoms, attrs, biased = {}, {}, set()
    cells = []
    for r in range(cfg.rows):
        for c in range(cfg.cols):
            rid = cell_id(r, c)
            geoms[rid] = box(c, r, c + 1, r + 1)
            attrs[rid] = {
                "row": r,
                "col": c,
                "district": f"d{r // cfg.district_size:02d}{c // cfg.district_size:02d}",
            }
            if _in_zone(cfg, r, c):
                biased.add(rid)
            cells.append((rid, r, c))

    if cfg.vary_density:
        counts = np.maximum(rng.poisson(cfg.obs_per_region, size=len(cells)), 1)
    else:
        counts = np.full(len(cells), cfg.obs_per_region)
    n = int(counts.sum())
    cell_idx = np.repeat(np.arange(len(cells)), counts)
    rows = np.array([cells[i][1] for i in cell_idx], dtype=np.float64)
    cols = np.array([cells[i][2] for i in cell_idx], dtype=np.float64)
    # keep points off cell boundaries so the join is unambiguous
    lon = cols + rng.uniform(0.05, 0.95, size=n)
    lat = rows + rng.uniform(0.05, 0.95, size=n)

    cx, cy = cfg.cols / 2, cfg.rows / 2
    radius = np.hypot(lon - cx, lat - cy) / np.hypot(cx, cy)
    surface = cfg.base_price * (1 + cfg.amplitude * (1 - 2 * radius))
    z_true = surface * np.exp(cfg.price_noise * rng.standard_normal(n))
    in_zone = np.array([cells[i][0] in biased for i in cell_idx])
    model_err = np.maximum(1 + cfg.model_noise * rng.standard_normal(n), 0.05)
    z_pred = z_true * np.where(in_zone, cfg.factor, 1.0) * model_err

    table = ObservationTable(
        region_id=np.array([cells[i][0] for i in cell_idx], dtype=object),
        z_true=z_true,
        z_pred=z_pred,
        row=np.arange(2, n + 2, dtype=np.int64),
        n_loaded=n,
    )
    return City(cfg, RegionSet(geoms, attrs), table, lon, lat, frozenset(biased))


def regions_to_geojson(regions, id_key="CODE_IRIS", properties=None):
    """FeatureCollection of ``regions`` with optional extra per-region properties."""
    features = []
    for rid in regions.ids:
        props = {id_key: rid, **regions.attributes.get(rid, {})}
        if properties and rid in properties:
            props.update(properties[rid])
        geom = regions.geometries[rid].__geo_interface__
        features.append({"type": "Feature", "properties": props, "geometry": _plain(geom)})
    return {"type": "FeatureCollection", "features": features}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def write_city(city, out_dir, id_key="CODE_IRIS"):
    """Write regions.geojson, observations.csv and bias_mask.json; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "regions": out / "regions.geojson",
        "observations": out / "observations.csv",
        "bias_mask": out / "bias_mask.json",
    }
    collection = regions_to_geojson(city.regions, id_key)
    collection["config"] = city.config.to_dict()
    atomic_write_text(paths["regions"], dump_json(collection))

    obs = city.observations
    rows = [
        [repr(float(city.lon[i])), repr(float(city.lat[i])),
         repr(float(obs.z_true[i])), repr(float(obs.z_pred[i])), obs.region_id[i]]
        for i in range(len(obs))
    ]
    atomic_write_csv(paths["observations"], ["lon", "lat", "z_true", "z_pred", "region_id"], rows)
    atomic_write_text(paths["bias_mask"], dump_json(sorted(city.biased)))
    return paths
