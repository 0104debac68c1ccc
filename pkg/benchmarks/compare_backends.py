#!/usr/bin/env python3
"""Time the compiled kernels against the numpy fallback.

Runs each hot kernel at the shapes the reference network and the degradation
filter actually use, then the full generator forward pass, and prints a
table of median times plus the speedup.  ``--json`` emits the same numbers
as one JSON document.
"""

import argparse
import json
import statistics
import sys
import time

import numpy as np

from ebenkit import backend, degrade
from ebenkit.audio import AudioBuffer
from ebenkit.neural import REFERENCE_CONFIG, generator_forward, init_weights
from ebenkit.rng import SplitMix64


def median_ms(fn, reps, warmup=1):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(times)


def cases(seconds):
    rng = SplitMix64(0)
    n = int(16000 * seconds)

    def arr(*shape):
        return rng.normal(int(np.prod(shape))).reshape(shape)

    # encoder residual unit at the widest resolution: 64 channels, 2000 frames, dilation 9
    x64 = arr(64, n // 8)
    w_res, b64 = arr(64, 64, 3), arr(64)
    # grouped strided discriminator layer (groups 4, kernel 41, stride 4)
    x256 = arr(64, n // 16)
    w_grp, b256 = arr(256, 16, 41), arr(256)
    # outermost decoder upsampler: 64 -> 32 channels, stride 2, kernel 4
    x_up = arr(64, n // 8)
    w_up, b32 = arr(32, 64, 4), arr(32)
    coeffs = degrade.design_biquad_lowpass(600.0, 1.0, 16000.0)
    sig = arr(n)

    weights = init_weights(REFERENCE_CONFIG, 0)
    audio = AudioBuffer(0.1 * arr(n))
    return {
        "conv1d dilated 64x64": lambda k: k.conv1d(x64, w_res, b64, 1, 9, 9, 9, 1),
        "conv1d grouped 64->256": lambda k: k.conv1d(x256, w_grp, b256, 4, 1, 19, 20, 4),
        "conv_transpose1d 64->32": lambda k: k.conv_transpose1d(x_up, w_up, b32, 2, 1, 2 * x_up.shape[1]),
        "biquad filter": lambda k: k.biquad_filter(coeffs.b, coeffs.a, sig, np.zeros(2)),
        "generator forward": lambda _k: generator_forward(REFERENCE_CONFIG, weights, audio),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seconds", type=float, default=1.0, help="signal duration the shapes derive from")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--json", action="store_true")
    args = p.parse_args(argv)

    names = backend.available()
    if "compiled" not in names:
        print("compiled kernels are not built; only the fallback can be timed", file=sys.stderr)
    previous = backend.name()
    results = {}
    try:
        for label, fn in cases(args.seconds).items():
            row = {}
            for name in names:
                backend.use(name)
                kernels = backend.get(name)
                row[name] = median_ms(lambda: fn(kernels), args.reps)
            results[label] = row
    finally:
        backend.use(previous)

    if args.json:
        print(json.dumps({"seconds": args.seconds, "reps": args.reps, "median_ms": results}, indent=2))
        return 0
    print(f"{'kernel':<26}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, row in results.items():
        line = f"{label:<26}" + "".join(f"{row[n]:>10.2f}ms" for n in names)
        if len(names) > 1:
            line += f"{row['python'] / row['compiled']:>11.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
