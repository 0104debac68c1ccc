"""Generator latency and size accounting."""

from __future__ import annotations

import contextlib
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import backend
from .audio import AudioBuffer
from .errors import InvalidParamsError
from .neural import NetworkConfig, count_params, generator_forward, init_weights, largest_activation
from .rng import SplitMix64

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # timing then runs with whatever BLAS threading is configured
    threadpool_limits = None

INPUT_RMS = 0.1
ACTIVATION_BYTES = 8  # forward passes run in float64
WEIGHT_BYTES = 4


@dataclass(frozen=True)
class BenchReport:
    latency_ms_mean: float
    latency_ms_median: float
    latency_ms_p95: float
    realtime_factor: float
    seconds: float
    generator_params: int
    discriminator_params: int
    weights_bytes: int
    activation_bytes: int
    repetitions: int
    warmup_reps: int
    backend: str
    single_threaded: bool
    samples_ms: tuple[float, ...]

    def to_json(self) -> str:
        d = asdict(self)
        d["samples_ms"] = list(self.samples_ms)
        return json.dumps(d, sort_keys=True)


def _single_thread():
    if threadpool_limits is None:
        return contextlib.nullcontext(), False
    return threadpool_limits(limits=1), True


def bench_forward(cfg: NetworkConfig, seconds: float = 1.0, reps: int = 10, warmup: int = 1,
                  seed: int = 0, single_thread: bool = True) -> BenchReport:
    """Time ``generator_forward`` on seeded noise; warmup runs are discarded.

    ``realtime_factor`` is the median latency divided by the input duration.
    Weight and activation sizes are static estimates from the config.
    """
    if reps < 10:
        raise InvalidParamsError(f"reps must be >= 10, got {reps}")
    if warmup < 1:
        raise InvalidParamsError(f"warmup must be >= 1, got {warmup}")
    if not seconds > 0:
        raise InvalidParamsError("seconds must be positive")
    n = int(round(seconds * cfg.sample_rate_hz))
    if n < 1:
        raise InvalidParamsError("input would be empty")
    weights = init_weights(cfg, seed)
    x = AudioBuffer(INPUT_RMS * SplitMix64(seed).normal(n), cfg.sample_rate_hz)

    ctx, limited = _single_thread() if single_thread else (contextlib.nullcontext(), False)
    times = []
    with ctx:
        for i in range(warmup + reps):
            t0 = time.perf_counter()
            generator_forward(cfg, weights, x)
            dt = (time.perf_counter() - t0) * 1000.0
            if i >= warmup:
                times.append(dt)
    arr = np.array(times)
    median = float(np.median(arr))
    gen, disc = count_params(cfg)
    return BenchReport(
        latency_ms_mean=float(arr.mean()),
        latency_ms_median=median,
        latency_ms_p95=float(np.percentile(arr, 95)),
        realtime_factor=median / (1000.0 * n / cfg.sample_rate_hz),
        seconds=n / cfg.sample_rate_hz,
        generator_params=gen,
        discriminator_params=disc,
        weights_bytes=WEIGHT_BYTES * gen,
        activation_bytes=ACTIVATION_BYTES * largest_activation(cfg, n),
        repetitions=reps,
        warmup_reps=warmup,
        backend=backend.name(),
        single_threaded=limited,
        samples_ms=tuple(times),
    )
