"""Compare the numba kernels with the numpy / pure-Python fallback.

Each backend runs in its own interpreter (the switch is read at import time):

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeat 10 --size 512

First-call JIT compilation is timed separately from the steady-state runs.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(size, repeat):
    from imgforensics import kernels
    from imgforensics.analysis import ela, noise_analysis
    from imgforensics.codec import EncodeParams, decode, encode
    from imgforensics.image import PixelImage
    from imgforensics.synth import texture

    rng = np.random.default_rng(0)
    blocks = rng.uniform(-128, 127, ((size // 8) ** 2, 8, 8))
    plane = rng.uniform(0, 255, (size, size))
    img = PixelImage.from_array(texture(rng, size, size))
    jpeg = encode(img, EncodeParams(90, "4:2:0"))

    cases = {
        "fdct": lambda: kernels.fdct_blocks(blocks),
        "idct": lambda: kernels.idct_blocks(blocks),
        "median_rows(5)": lambda: kernels.median_rows(plane, 5),
        "encode q90": lambda: encode(img, EncodeParams(90, "4:2:0")),
        "decode": lambda: decode(jpeg),
        "noise(3)": lambda: noise_analysis(img, 3),
        "ela": lambda: ela(img),
    }
    t0 = time.perf_counter()
    for fn in cases.values():
        fn()
    warmup = time.perf_counter() - t0
    slow = kernels.backend() == "numpy"
    # the pure-Python Huffman loops are slow; fewer repeats keep the run short
    reps = max(1, repeat // 5) if slow else repeat
    result = {name: _best(fn, reps) for name, fn in cases.items()}
    print(json.dumps({"backend": kernels.backend(), "warmup": warmup, "times": result}))


def run_backend(disable, size, repeat):
    env = dict(os.environ)
    env.pop("IMGFORENSICS_DISABLE_NUMBA", None)
    if disable:
        env["IMGFORENSICS_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, __file__, "--child", "--size", str(size),
                          "--repeat", str(repeat)], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="square image side in pixels")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.size, args.repeat)
        return
    fast = run_backend(False, args.size, args.repeat)
    slow = run_backend(True, args.size, args.repeat)
    print(f"{args.size}x{args.size} image, best of {args.repeat} (numpy backend: fewer repeats)")
    print(f"{'case':<16}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<16}{t_fast * 1e3:12.2f}{t_slow * 1e3:12.2f}{t_slow / t_fast:10.1f}x")
    print(f"first-call cost: numba {fast['warmup']:.2f} s (JIT or cache load), "
          f"numpy {slow['warmup']:.2f} s")


if __name__ == "__main__":
    main()
