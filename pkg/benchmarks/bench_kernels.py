"""Time each numeric kernel under numba and under plain numpy.

    python benchmarks/bench_kernels.py [--repeat 5] [--only idw morph]

Both variants are imported from the same module regardless of
BRIDGEFUSE_NO_JIT, and their outputs are compared before timing.
The first numba call (compilation, or loading the on-disk cache) is excluded.
"""

import argparse
import timeit

import numpy as np

from bridgefuse import geometry, imaging, kernels


def _cases(rng):
    n = 2048
    a = rng.normal(size=n)
    b = np.concatenate([np.zeros(40), a[:-40]]) + 0.1 * rng.normal(size=n)
    yield "xcorr_full", (a, b), f"n={n}"

    x = np.sort(rng.normal(size=3000))
    yield "kmeans_dp", (x, 3), "n=3000, k=3"

    pts = rng.uniform(0, 100, size=(4000, 2))
    p, tris = geometry.alpha_triangles(pts, np.inf)
    yield "circumradius", (p, tris), f"{tris.shape[0]} triangles"

    region = geometry.alpha_shape(rng.normal(size=(400, 2)), 0.4)
    px, py = rng.uniform(-3, 3, size=(2, 200_000))
    edges = region.edges()
    yield "points_in_edges", (px, py, edges, 1e-9), f"2e5 probes, {edges.shape[0]} edges"

    img = rng.integers(0, 256, size=(600, 800, 3), dtype=np.uint8)
    yield "hsv_mask", (img, 20.0, 340.0, 65.0, 0.35, 0.35), "800x600"

    blur = imaging._blur_u8(imaging._luma_u8(img))
    smooth = np.array([1.0, 2.0, 1.0])
    diff = np.array([-1.0, 0.0, 1.0])
    gx = imaging._correlate_axis(imaging._correlate_axis(blur, smooth, 0, "edge"), diff, 1, "edge")
    gy = imaging._correlate_axis(imaging._correlate_axis(blur, diff, 0, "edge"), smooth, 1, "edge")
    mag = np.abs(gx) + np.abs(gy)
    yield "nms", (gx, gy, mag, 50.0), "800x600"
    thin = kernels.nms_np(gx, gy, mag, 50.0)
    yield "hysteresis", (thin, 50.0, 150.0), "800x600"

    mask = rng.random((600, 800)) < 0.3
    yield "morph", (mask, 7, 3, True), "800x600, 7x7 x3"
    yield "external_boxes", (imaging.close_open(mask, 3, 1),), "800x600"

    sx, sy = rng.uniform(0, 60, size=(2, 3000))
    sv = rng.uniform(1, 12, size=3000)
    gxs = np.arange(0, 60.01, 0.25)
    gys = np.arange(0, 30.01, 0.25)
    yield "idw", (sx, sy, sv, gxs, gys, 0.75, 2.0), f"3000 samples, {gxs.size}x{gys.size} nodes"


def _same(x, y) -> bool:
    if isinstance(x, np.ndarray):
        if x.dtype.kind == "f":
            return np.allclose(x, y, rtol=1e-9, atol=0.0, equal_nan=True)
        if x.ndim == 2 and x.shape[1] == 4 and x.dtype.kind == "i":  # box lists may come out in any order
            return sorted(map(tuple, x.tolist())) == sorted(map(tuple, y.tolist()))
        return np.array_equal(x, y)
    return all(_same(a, b) for a, b in zip(x, y))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timed runs per kernel; the best is reported")
    ap.add_argument("--only", nargs="*", help="kernel names to run")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'size':<30}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  agree")
    for name, inputs, size in _cases(rng):
        if args.only and name not in args.only:
            continue
        nb = getattr(kernels, f"{name}_nb")
        npf = getattr(kernels, f"{name}_np")
        agree = _same(nb(*inputs), npf(*inputs))  # also warms the JIT
        t_nb = min(timeit.repeat(lambda: nb(*inputs), number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(lambda: npf(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<16}{size:<30}{t_nb:>10.2f}{t_np:>10.2f}{t_np / t_nb:>8.1f}x  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
