"""Time the Taylor-Hood element kernels with the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--nx 12 --ny 50]

Both backends run on the same inputs; results are checked to agree before
timings are reported. The first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np

from porofem import _jit, kernels
from porofem.assembly import QuadGeometry, kernel_params
from porofem.mesh import generate_quad_mesh
from porofem.problems import preset_mp3


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--nx", type=int, default=12)
    ap.add_argument("--ny", type=int, default=50)
    args = ap.parse_args(argv)
    if not _jit.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    preset = preset_mp3()
    mesh = generate_quad_mesh(preset.width, preset.height, preset.width / args.nx, preset.height / args.ny, 2)
    g = QuadGeometry(mesh)
    params = preset.material
    prm = kernel_params(params)
    rng = np.random.default_rng(0)
    ne = g.n_elem
    ue = 1e-5 * rng.standard_normal((ne, 2, 9))
    pe = -3e3 + 3e3 * rng.standard_normal((ne, 4))
    uen, pen = 0.9 * ue, pe + 50.0

    cases = {
        "mp2_blocks": lambda nb: kernels.mp2_blocks(
            g.dN9, g.N4, g.dN4, g.wdet, params.lam, params.mu, params.mobility, use_numba=nb
        ),
        "mp3_local": lambda nb: kernels.mp3_local(
            g.dN9, g.N9, g.dN4, g.N4, g.wdet, ue, pe, uen, pen, prm, 60.0, True, use_numba=nb
        ),
        "mp3_residual": lambda nb: kernels.mp3_local(
            g.dN9, g.N9, g.dN4, g.N4, g.wdet, ue, pe, uen, pen, prm, 60.0, False, use_numba=nb
        ),
    }
    print(f"{ne} elements, best of {args.repeat}")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, fn in cases.items():
        fn(True)  # compile
        t_np, out_np = best_of(lambda: fn(False), args.repeat)
        t_nb, out_nb = best_of(lambda: fn(True), args.repeat)
        for a, b in zip(out_np, out_nb):
            if a.size:
                np.testing.assert_allclose(b, a, rtol=1e-10, atol=1e-10 * np.abs(a).max())
        print(f"{name:<14}{1e3 * t_np:12.2f}{1e3 * t_nb:12.2f}{t_np / t_nb:10.1f}")


if __name__ == "__main__":
    main()
