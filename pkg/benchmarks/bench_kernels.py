"""Time each kernel under the compiled and pure-Python backends.

    python benchmarks/bench_kernels.py [--rows 30 --cols 30 --repeat 5]

Inputs come from a synthetic grid city so the sizes match real use: the
all-pairs BFS and smoothing run over every cell, the plug-in argmax and
confusion counts over every observation.
"""

import argparse
import timeit

import numpy as np

from geofair import kernels
from geofair.graph import build_adjacency
from geofair.synth import SynthConfig, generate_city


def cases(rows, cols, obs, K=5):
    city = generate_city(SynthConfig(rows=rows, cols=cols, obs_per_region=obs))
    g = build_adjacency(city.regions)
    n_obs = len(city.observations)
    rng = np.random.default_rng(0)
    dist = kernels.get_backend("python").bfs_distances(g.indptr, g.indices, 9)
    values = rng.normal(size=len(g))
    present = rng.random(len(g)) > 0.1
    mult = np.ones(len(g))
    scores = rng.dirichlet(np.ones(K), size=n_obs)
    group = rng.integers(0, 2, n_obs)
    scale = np.where(group == 0, 0.3, 0.7)
    offsets = rng.normal(scale=0.01, size=(2, K))
    y, y_hat = rng.integers(0, K, n_obs), rng.integers(0, K, n_obs)
    return {
        "bfs_distances": lambda b: b.bfs_distances(g.indptr, g.indices, 9),
        "smooth": lambda b: b.smooth(dist, values, present, mult, 1.0, 5),
        "plugin_argmax": lambda b: b.plugin_argmax(scores, scale, group, offsets),
        "confusion_counts": lambda b: b.confusion_counts(y, y_hat, group, K, 2),
    }, len(g), n_obs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=30)
    ap.add_argument("--cols", type=int, default=30)
    ap.add_argument("--obs-per-region", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    funcs, n_regions, n_obs = cases(args.rows, args.cols, args.obs_per_region)
    print(f"{n_regions} regions, {n_obs} observations; backends: {', '.join(backends)}")
    print(f"{'kernel':<18}" + "".join(f"{b + ' (ms)':>16}" for b in backends) + f"{'speedup':>10}")
    for name, fn in funcs.items():
        best = {}
        for b in backends:
            backend = kernels.get_backend(b)
            timer = timeit.Timer(lambda: fn(backend))
            loops, _ = timer.autorange()
            best[b] = min(timer.repeat(args.repeat, loops)) / loops * 1e3
        line = f"{name:<18}" + "".join(f"{best[b]:>16.3f}" for b in backends)
        if "compiled" in best:
            line += f"{best['python'] / best['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
