"""Command-line interface: ``geofair {synth,audit,smooth,sweep,mitigate}``.

Exit codes: 0 success, 1 internal failure, 2 user or configuration error.
Every JSON/GeoJSON output embeds the resolved run configuration.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import graph as graph_mod
from .ingest import (
    DEFAULT_ID_KEY,
    DEFAULT_PRICE_CAP,
    IngestError,
    ObservationSchema,
    clean,
    load_observations,
    load_regions,
    spatial_join,
)
from .metrics import GroupAssignment, MetricError, audit, ece, eo_vs_global, sweep_levels
from .mitigation import apply_mitigation, binary_groups, fit_lambda
from .ordinal import fit_binning, random_baseline, score_table
from .outputs import FORMAT_VERSION, atomic_write_csv, atomic_write_text, dump_json, fmt
from .smoothing import RegionField, SmoothingParams, smooth_field
from .synth import SynthConfig, generate_city, regions_to_geojson, write_city

log = logging.getLogger("geofair")

OUTPUT_ENV = "GEOFAIR_OUTPUT_DIR"
REGION_STATS = (
    "n_obs",
    "mean_relative_error",
    "mean_abs_relative_error",
    "mean_z_true",
    "mean_z_pred",
)


class UsageError(Exception):
    """Bad input or configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    subcommand: str
    out: str
    regions: str | None = None
    observations: str | None = None
    id_key: str = DEFAULT_ID_KEY
    col_z_true: str = "z_true"
    col_z_pred: str = "z_pred"
    col_lon: str = "lon"
    col_lat: str = "lat"
    col_region_id: str | None = None
    exclude_regions: str | None = None
    K: int = 5
    B: int = 10
    p: float = 1.0
    m: int = 5
    horizon: int = graph_mod.DEFAULT_HORIZON
    price_cap: float = DEFAULT_PRICE_CAP
    min_support: int = 1
    epsilon: float = 0.01
    max_iters: int = 1000
    step: float = 0.1
    seed: int = 0
    global_bins: bool = False
    jitter: bool = False
    yhat_from: str = "interval"
    temperature: float = 1.0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _envelope(cfg, **payload):
    return {"spec_version": FORMAT_VERSION, "config": cfg.to_dict(), **payload}


# pipeline ------------------------------------------------------------------


class Pipeline:
    """Ingest, graph and discretisation shared by the analysis subcommands."""

    def __init__(self, cfg):
        self.cfg = cfg
        for name in ("regions", "observations"):
            path = getattr(cfg, name)
            if path is None:
                raise UsageError(f"--{name} is required")
            if not Path(path).is_file():
                raise UsageError(f"input file not found: {path}")
        self.regions = load_regions(cfg.regions, cfg.id_key)
        schema = ObservationSchema(
            z_true=cfg.col_z_true, z_pred=cfg.col_z_pred,
            lon=cfg.col_lon, lat=cfg.col_lat, region_id=cfg.col_region_id,
        )
        joined = spatial_join(load_observations(cfg.observations, schema), self.regions)
        self.table = clean(joined, cfg.price_cap, _read_id_list(cfg.exclude_regions) if cfg.exclude_regions else ())
        if len(self.table) == 0:
            raise UsageError("no observations left after joining and cleaning")
        self.graph = graph_mod.region_graph(self.regions, cfg.horizon)
        self.scheme = fit_binning(self.table.z_true, cfg.K)
        self.scored = score_table(self.table, self.scheme, cfg.yhat_from, cfg.temperature)

    def region_stats(self):
        """Per-region observation summaries keyed by statistic name."""
        rel = (self.table.z_pred - self.table.z_true) / self.table.z_true
        stats = {name: {} for name in REGION_STATS}
        order = np.argsort(self.table.region_id.astype(str), kind="stable")
        rids = self.table.region_id[order]
        bounds = np.flatnonzero(np.r_[True, rids[1:] != rids[:-1], True])
        for s, e in zip(bounds[:-1], bounds[1:]):
            rid, idx = rids[s], order[s:e]
            stats["n_obs"][rid] = int(e - s)
            stats["mean_relative_error"][rid] = float(rel[idx].mean())
            stats["mean_abs_relative_error"][rid] = float(np.abs(rel[idx]).mean())
            stats["mean_z_true"][rid] = float(self.table.z_true[idx].mean())
            stats["mean_z_pred"][rid] = float(self.table.z_pred[idx].mean())
        return stats

    def field(self, name):
        if name in REGION_STATS:
            return RegionField(self.region_stats()[name], name)
        values = {}
        for rid, v in self.regions.attribute(name).items():
            try:
                values[rid] = float(v)
            except (TypeError, ValueError):
                raise UsageError(f"region property {name!r} is not numeric for {rid!r}") from None
        if not any(name in a for a in self.regions.attributes.values()):
            raise UsageError(
                f"unknown field {name!r}; use one of {', '.join(REGION_STATS)} or a numeric region property"
            )
        return RegionField(values, name)

    def smoothing(self):
        return SmoothingParams(self.cfg.p, self.cfg.m)


def _read_id_list(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"input file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, list) or not all(isinstance(v, str) for v in data):
        raise UsageError(f"{path}: expected a JSON list of region ids")
    return data


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# subcommands -----------------------------------------------------------------


def cmd_synth(cfg):
    x = cfg.extra
    try:
        synth_cfg = SynthConfig(
            rows=x["rows"], cols=x["cols"], factor=x["factor"], bias_zone=x["bias_zone"],
            bias_quadrant=x["bias_quadrant"], bias_center=x["bias_center"],
            bias_radius=x["bias_radius"], obs_per_region=x["obs_per_region"],
            amplitude=x["amplitude"], price_noise=x["price_noise"],
            model_noise=x["model_noise"], seed=cfg.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    paths = write_city(generate_city(synth_cfg), _out_dir(cfg), cfg.id_key)
    return list(paths.values())


def cmd_audit(cfg):
    pipe = Pipeline(cfg)
    out = _out_dir(cfg)
    groupings = []
    for attr in cfg.extra.get("group_by") or []:
        mapping = pipe.regions.attribute(attr)
        if not mapping:
            raise UsageError(f"no region carries property {attr!r}")
        groupings.append(GroupAssignment.from_regions(pipe.scored.region_id, mapping, attr))
    report = audit(pipe.scored, groupings, cfg.B, cfg.min_support, cfg.global_bins)

    audit_json = _envelope(
        cfg,
        ingest=pipe.table.summary(),
        scheme=pipe.scheme.to_dict(),
        report=report.to_dict(),
    )
    header = ["grouping", "group", "n", "eo_vs_global", "eo_pred_class", "eo_true_class", "ece", "ece_bins"]
    rows = [["global", "all", report.n, fmt(0.0), "", "", fmt(report.ece.ece), report.ece.B]]
    for r in report.rows():
        w = r.eo_witness or ("", "")
        rows.append([r.grouping, r.group, r.n, fmt(r.eo), w[0], w[1], fmt(r.ece), r.ece_bins])

    stats = pipe.region_stats()
    rel = RegionField(stats["mean_relative_error"], "mean_relative_error")
    smoothed = smooth_field(rel, pipe.graph, pipe.smoothing())
    props = {}
    for rid in pipe.regions.ids:
        mask = pipe.scored.region_id == rid
        entry = {
            "n_obs": stats["n_obs"].get(rid, 0),
            "mean_relative_error": rel.get(rid),
            "mean_relative_error_smoothed": smoothed.get(rid),
            "n_contributing": smoothed.counts.get(rid, 0),
            "eo_vs_global": None,
            "ece": None,
        }
        if mask.any():
            entry["eo_vs_global"] = eo_vs_global(pipe.scored, mask, cfg.min_support).value
            entry["ece"] = ece(pipe.scored.take(mask), cfg.B).ece
        props[rid] = entry
    geo = regions_to_geojson(pipe.regions, cfg.id_key, props)
    geo.update(_envelope(cfg))

    written = [out / "audit.json", out / "audit.csv", out / "regions_metrics.geojson"]
    atomic_write_text(written[0], dump_json(audit_json))
    atomic_write_csv(written[1], header, rows)
    atomic_write_text(written[2], dump_json(geo))
    return written


def cmd_smooth(cfg):
    pipe = Pipeline(cfg)
    name = cfg.extra["field"]
    raw = pipe.field(name)
    if all(raw.get(rid) is None for rid in raw.values):
        raise UsageError(f"field {name!r} has no values")
    smoothed = smooth_field(raw, pipe.graph, pipe.smoothing())
    props = {
        rid: {"raw": raw.get(rid), "smoothed": smoothed.get(rid), "n_contributing": smoothed.counts[rid]}
        for rid in pipe.regions.ids
    }
    geo = regions_to_geojson(pipe.regions, cfg.id_key, props)
    geo.update(_envelope(cfg, field=name))
    path = _out_dir(cfg) / "smoothed.geojson"
    atomic_write_text(path, dump_json(geo))
    return [path]


def cmd_sweep(cfg):
    pipe = Pipeline(cfg)
    center, levels = cfg.extra["center"], cfg.extra["levels"]
    if center not in pipe.regions:
        raise UsageError(f"unknown center region {center!r}")
    if levels is None:
        levels = cfg.horizon
    if not 1 <= levels <= cfg.horizon:
        raise UsageError(f"--levels must be in [1, horizon={cfg.horizon}]")
    baseline = None
    if cfg.extra.get("random_baseline"):
        y_hat, scores = random_baseline(len(pipe.scored), cfg.K, cfg.seed)
        baseline = pipe.scored.with_predictions(y_hat, scores)
    points = sweep_levels(pipe.scored, pipe.graph, center, range(1, levels + 1), cfg.B, cfg.min_support, baseline)

    header = ["level", "n_rows", "n_regions", "eo", "ece"]
    if baseline is not None:
        header += ["random_eo", "random_ece"]
    rows = []
    for pt in points:
        row = [pt.level, pt.n_rows, pt.n_regions, fmt(pt.eo), fmt(pt.ece)]
        if baseline is not None:
            row += [fmt(pt.random_eo), fmt(pt.random_ece)]
        rows.append(row)
    out = _out_dir(cfg)
    atomic_write_csv(out / "sweep.csv", header, rows)
    atomic_write_text(
        out / "sweep.json",
        dump_json(_envelope(cfg, center=center, curve=[asdict(p) for p in points])),
    )
    return [out / "sweep.csv", out / "sweep.json"]


def _mitigation_members(cfg, pipe):
    spec_file, attr = cfg.extra.get("group_regions"), cfg.extra.get("group_attr")
    if bool(spec_file) == bool(attr):
        raise UsageError("give exactly one of --group-regions or --group-attr")
    if spec_file:
        members = _read_id_list(spec_file)
        unknown = sorted(set(members) - set(pipe.regions.ids))
        if unknown:
            raise UsageError(f"group lists unknown region id(s): {', '.join(unknown[:10])}")
        if not members:
            raise UsageError("group region list is empty")
        return set(members)
    key, sep, value = attr.partition("=")
    if not sep:
        raise UsageError("--group-attr must look like KEY=VALUE")
    members = {rid for rid, v in pipe.regions.attribute(key).items() if str(v) == value}
    if not members:
        raise UsageError(f"no region has {key}={value}")
    return members


def cmd_mitigate(cfg):
    pipe = Pipeline(cfg)
    members = _mitigation_members(cfg, pipe)
    groups = binary_groups(pipe.scored.region_id, members, descriptor="group vs rest")
    if groups.M != 2:
        raise UsageError("both the group and the rest must contain observations")
    model = fit_lambda(
        pipe.scored, groups, cfg.epsilon, cfg.max_iters, cfg.step,
        positive="1", jitter=cfg.jitter, seed=cfg.seed,
    )
    res = apply_mitigation(pipe.scored, groups, model, pipe.scheme)
    y = pipe.scored.y
    diagnostics = {
        "accuracy_original": float((res.original == y).mean()),
        "accuracy_mitigated": float((res.mitigated == y).mean()),
        "share_changed": float((res.original != res.mitigated).mean()),
        "dp_trace": list(model.dp_trace),
        "objective_trace": list(model.objective_trace),
    }
    out = _out_dir(cfg)
    atomic_write_text(
        out / "model.json",
        dump_json(_envelope(cfg, model=model.to_dict(), scheme=pipe.scheme.to_dict(), diagnostics=diagnostics)),
    )

    header = ["row", "region_id", "group", "original_class", "mitigated_class",
              "original_midpoint_price", "mitigated_midpoint_price"]
    rows = [
        [int(pipe.table.row[i]), pipe.scored.region_id[i], groups.labels[i],
         int(res.original[i]), int(res.mitigated[i]),
         fmt(float(res.original_price[i])), fmt(float(res.mitigated_price[i]))]
        for i in range(len(y))
    ]
    atomic_write_csv(out / "mitigated.csv", header, rows)

    props = {}
    for rid in pipe.regions.ids:
        mask = pipe.scored.region_id == rid
        entry = {"in_group": rid in members, "n_obs": int(mask.sum())}
        if mask.any():
            entry.update(
                mean_original_class=float(res.original[mask].mean()),
                mean_mitigated_class=float(res.mitigated[mask].mean()),
                mean_midpoint_price_shift=float(
                    (res.mitigated_price[mask] - res.original_price[mask]).mean()
                ),
            )
        props[rid] = entry
    geo = regions_to_geojson(pipe.regions, cfg.id_key, props)
    geo.update(_envelope(cfg))
    atomic_write_text(out / "mitigation.geojson", dump_json(geo))
    return [out / "model.json", out / "mitigated.csv", out / "mitigation.geojson"]


COMMANDS = {
    "synth": cmd_synth,
    "audit": cmd_audit,
    "smooth": cmd_smooth,
    "sweep": cmd_sweep,
    "mitigate": cmd_mitigate,
}


# argument parsing ------------------------------------------------------------


def _center(text):
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected ROW,COL") from None
    return (r, c)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=os.environ.get(OUTPUT_ENV, "geofair-out"),
                        help=f"output directory (default: ${OUTPUT_ENV} or ./geofair-out)")
    common.add_argument("--id-key", default=DEFAULT_ID_KEY, help="region id property")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    inputs = argparse.ArgumentParser(add_help=False)
    g = inputs.add_argument_group("inputs")
    g.add_argument("--regions", help="GeoJSON FeatureCollection of region polygons")
    g.add_argument("--observations", help="CSV of observations")
    g.add_argument("--col-z-true", default="z_true")
    g.add_argument("--col-z-pred", default="z_pred")
    g.add_argument("--col-lon", default="lon")
    g.add_argument("--col-lat", default="lat")
    g.add_argument("--col-region-id", default=None,
                   help="read region ids from this column instead of joining coordinates")
    g.add_argument("--exclude-regions", default=None, help="JSON list of region ids to drop")
    g.add_argument("--price-cap", type=float, default=DEFAULT_PRICE_CAP)
    a = inputs.add_argument_group("analysis")
    a.add_argument("--K", "--classes", dest="K", type=int, default=5)
    a.add_argument("--B", "--bins", dest="B", type=int, default=10)
    a.add_argument("--p", type=float, default=1.0, help="smoothing exponent")
    a.add_argument("--m", type=int, default=5, help="smoothing cutoff (hops)")
    a.add_argument("--horizon", type=int, default=graph_mod.DEFAULT_HORIZON)
    a.add_argument("--min-support", type=int, default=1)
    a.add_argument("--global-bins", action="store_true", help="share ECE bins across subsets")
    a.add_argument("--yhat-from", choices=("interval", "argmax"), default="interval")
    a.add_argument("--temperature", type=float, default=1.0)

    parser = argparse.ArgumentParser(prog="geofair", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic city")
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--cols", type=int, default=20)
    p.add_argument("--factor", type=float, default=0.85)
    p.add_argument("--bias-zone", choices=("quadrant", "ball", "none"), default="quadrant")
    p.add_argument("--bias-quadrant", choices=("sw", "se", "nw", "ne"), default="sw")
    p.add_argument("--bias-center", type=_center, default=None, metavar="ROW,COL")
    p.add_argument("--bias-radius", type=int, default=1)
    p.add_argument("--obs-per-region", type=int, default=30)
    p.add_argument("--amplitude", type=float, default=SynthConfig.amplitude)
    p.add_argument("--price-noise", type=float, default=SynthConfig.price_noise)
    p.add_argument("--model-noise", type=float, default=SynthConfig.model_noise)

    p = sub.add_parser("audit", parents=[common, inputs], help="calibration and EO audit")
    p.add_argument("--group-by", action="append", default=[], metavar="PROPERTY",
                   help="group regions by this property (repeatable)")

    p = sub.add_parser("smooth", parents=[common, inputs], help="smooth a per-region field")
    p.add_argument("--field", required=True,
                   help=f"one of {', '.join(REGION_STATS)} or a numeric region property")

    p = sub.add_parser("sweep", parents=[common, inputs], help="metrics over growing neighbourhoods")
    p.add_argument("--center", required=True, help="center region id")
    p.add_argument("--levels", type=int, default=None, help="largest level (default: horizon)")
    p.add_argument("--random-baseline", action="store_true")

    p = sub.add_parser("mitigate", parents=[common, inputs], help="demographic-parity post-processing")
    p.add_argument("--group-regions", default=None, help="JSON list of region ids forming the group")
    p.add_argument("--group-attr", default=None, metavar="KEY=VALUE")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--jitter", action="store_true", help="add 1e-5 seeded noise to scores")
    return parser


_CONFIG_FIELDS = set(RunConfig.__dataclass_fields__) - {"extra"}


def config_from_args(args):
    values = vars(args).copy()
    values.pop("verbose", None)
    known = {k: v for k, v in values.items() if k in _CONFIG_FIELDS}
    extra = {k: v for k, v in values.items() if k not in _CONFIG_FIELDS}
    return RunConfig(**known, extra=extra)


def _validate(cfg):
    if cfg.K < 2:
        raise UsageError("--K must be >= 2")
    if cfg.B < 1:
        raise UsageError("--B must be >= 1")
    if cfg.horizon < 1:
        raise UsageError("--horizon must be >= 1")
    if cfg.m > cfg.horizon:
        raise UsageError(f"--m ({cfg.m}) cannot exceed --horizon ({cfg.horizon})")
    if cfg.min_support < 1:
        raise UsageError("--min-support must be >= 1")
    if not cfg.price_cap > 0:
        raise UsageError("--price-cap must be positive")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    cfg = config_from_args(args)
    try:
        _validate(cfg)
        written = COMMANDS[cfg.subcommand](cfg)
    except (UsageError, IngestError, MetricError, ValueError, KeyError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"geofair {cfg.subcommand}: error: {msg}", file=sys.stderr)
        return 2
    except Exception:
        log.exception("internal failure")
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
