"""Command-line entry point.

Reports go to stdout as JSON, diagnostics to stderr.  Exit codes: 0 on
success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import backend, degrade, metrics, pqmf, sysid
from .audio import AudioBuffer, peak_normalize, read_wav, write_wav
from .errors import EbenError, InvalidParamsError
from .losses import loss_breakdown
from .neural import (
    REFERENCE_CONFIG,
    count_params,
    discriminator_forward,
    generator_forward,
    init_weights,
    load_config,
    load_weights,
    save_weights,
    validate_config,
)
from .rng import MASK64

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
REQUIRED_RATE_HZ = 16000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _color(text: str, code: str) -> str:
    if os.environ.get("EBEN_NO_COLOR") or not sys.stderr.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _diag(msg: str) -> None:
    print(_color("error:", "31") + " " + msg, file=sys.stderr)


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v <= MASK64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _db(v: float):
    return metrics.format_db(v)


def _read16k(path) -> AudioBuffer:
    buf = read_wav(path)
    if buf.sample_rate_hz != REQUIRED_RATE_HZ:
        raise InvalidParamsError(f"{path}: sample rate {buf.sample_rate_hz} Hz, only 16000 Hz is supported")
    return buf


def _config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else REFERENCE_CONFIG
    validate_config(cfg)
    return cfg


# pqmf ----------------------------------------------------------------------

def cmd_pqmf_design(args):
    bank = pqmf.make_bank(args.bands, args.taps_per_band, args.atten)
    p = bank.prototype
    report = pqmf.design_report(bank)
    if args.out:
        Path(args.out).write_text(report)
    _emit({
        "bands": p.bands, "taps_per_band": p.taps_per_band, "length": p.length,
        "atten_db": p.atten_db, "kaiser_beta": float(p.beta),
        "cutoff_over_pi": p.cutoff_normalized, "criterion_residual": p.criterion_residual,
        "iterations": p.iterations, "achieved_atten_db": pqmf.achieved_attenuation_db(p),
        "delay": bank.delay, "report": args.out,
    })


def cmd_pqmf_roundtrip(args):
    x = _read16k(args.inp)
    bank = pqmf.make_bank(args.bands, args.taps_per_band, args.atten)
    padded = AudioBuffer(np.concatenate([x.samples, np.zeros(bank.delay)]), x.sample_rate_hz)
    y = pqmf.synthesize(bank, pqmf.analyze(bank, padded))
    if args.out:
        write_wav(args.out, y.with_samples(y.samples[bank.delay:]), "float32")
    _emit({"bands": bank.bands, "taps_per_band": args.taps_per_band, "delay": bank.delay,
           "length": len(x), "ser_db": _db(metrics.ser(y, x, bank.delay))})


# degrade -------------------------------------------------------------------

def _bounds(args):
    return degrade.load_bounds_csv(args.bounds) if args.bounds else degrade.default_bounds()


def cmd_degrade_fixed(args):
    out, rep = degrade.apply_psi_fixed(_read16k(args.inp), args.seed)
    wr = write_wav(args.out, out, args.encoding)
    _emit({"pipeline": rep.pipeline, "seed": rep.seed, "rel_db": rep.measured_noise_rel_db,
           "clip_count": wr.clip_count, "out": args.out})


def cmd_degrade_random(args):
    out, rep = degrade.apply_psi_random(_read16k(args.inp), _bounds(args), args.seed)
    wr = write_wav(args.out, out, args.encoding)
    _emit({"pipeline": rep.pipeline, "seed": rep.seed, "rel_db": rep.measured_noise_rel_db,
           "clip_count": wr.clip_count, "out": args.out})


def cmd_degrade_batch(args):
    bounds = _bounds(args) if args.pipeline == "random" else None
    rep = degrade.batch_degrade(args.inp, args.out, args.pipeline, args.seed, bounds,
                                workers=args.workers, encoding=args.encoding)
    _emit(json.loads(rep.to_json()))
    return EXIT_DATA if rep.errors else EXIT_OK


# sysid ---------------------------------------------------------------------

def _pair(args):
    y, x = _read16k(args.ref), _read16k(args.inp)
    if args.normalize:
        y, x = peak_normalize(y), peak_normalize(x)
    return y, x


def _welch(args) -> sysid.WelchConfig:
    return sysid.WelchConfig(fft_size=args.fft_size, horizon_samples=args.horizon)


def cmd_sysid_estimate(args):
    y, x = _pair(args)
    cfg = _welch(args)
    vad = sysid.vad_mask(y, args.vad_threshold)
    est = sysid.estimate_transfer(y, x, cfg, vad=vad)
    coh = sysid.coherence(y, x, cfg)
    sysid.write_csv(args.out, est, coh)
    _emit({"out": args.out, "n_segments": est.n_segments, "bins": len(est.freq_grid_hz),
           "active_fraction": float(np.mean(vad))})


def cmd_sysid_coherence(args):
    y, x = _pair(args)
    coh = sysid.coherence(y, x, _welch(args))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("freq_hz,coherence\n")
            for f, c in zip(coh.freq_grid_hz, coh.coherence):
                fh.write(f"{float(f)!r},{float(c)!r}\n")
    _emit({"n_frames": coh.n_frames, "freq_hz": coh.freq_grid_hz.tolist(),
           "coherence": coh.coherence.tolist()})


# weights / networks --------------------------------------------------------

def cmd_weights_init(args):
    cfg = _config(args)
    store = init_weights(cfg, args.seed)
    nbytes = save_weights(store, args.out)
    if args.config_out:
        Path(args.config_out).write_text(cfg.to_json() + "\n")
    gen, disc = count_params(cfg)
    _emit({"out": args.out, "tensors": len(store), "total_params": store.total_params,
           "generator_params": gen, "discriminator_params": disc, "file_bytes": nbytes})


def cmd_weights_inspect(args):
    cfg = load_config(args.config) if args.config else None
    store = load_weights(args.weights, cfg)
    _emit({"tensors": [{"name": n, "shape": list(a.shape)} for n, a in store.items()],
           "total_params": store.total_params, "bytes": store.nbytes})


def cmd_enhance(args):
    cfg = _config(args)
    store = load_weights(args.weights, cfg)
    x = _read16k(args.inp)
    y = generator_forward(cfg, store, x)
    wr = write_wav(args.out, y, args.encoding)
    _emit({"out": args.out, "length": len(y), "peak": float(np.max(np.abs(y.samples))),
           "clip_count": wr.clip_count})


def cmd_disc_forward(args):
    cfg = _config(args)
    store = load_weights(args.weights, cfg)
    scales = discriminator_forward(cfg, store, _read16k(args.inp))
    _emit({"scales": [
        {"k": k, "logit_length": int(s.logits.size), "logit_mean": float(np.mean(s.logits)),
         "feature_shapes": [list(f.shape) for f in s.features]}
        for k, s in enumerate(scales)
    ]})


def cmd_loss_eval(args):
    cfg = _config(args)
    store = load_weights(args.weights, cfg)
    real, fake = _read16k(args.ref), _read16k(args.inp)
    if len(real) != len(fake):
        raise InvalidParamsError("real and generated signals must have the same length")
    lb = loss_breakdown(discriminator_forward(cfg, store, real), discriminator_forward(cfg, store, fake))
    _emit(lb.to_dict())


def cmd_metrics(args):
    est, ref = _read16k(args.inp), _read16k(args.ref)
    _emit({"si_sdr_db": _db(metrics.si_sdr(est, ref)), "ser_db": _db(metrics.ser(est, ref, args.delay)),
           "length": len(ref), "delay": args.delay})


def cmd_bench(args):
    from .bench import bench_forward

    previous = backend.name()
    if args.backend:
        backend.use(args.backend)
    try:
        rep = bench_forward(_config(args), args.seconds, args.reps, args.warmup, args.seed)
    finally:
        backend.use(previous)
    print(rep.to_json())


# parser --------------------------------------------------------------------

def _bank_flags(p):
    p.add_argument("--bands", type=int, default=4)
    p.add_argument("--taps-per-band", type=int, default=pqmf.DEFAULT_TAPS_PER_BAND)
    p.add_argument("--atten", type=float, default=pqmf.DEFAULT_ATTEN_DB)


def _enc_flag(p):
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="float32")


def _sysid_flags(p):
    p.add_argument("--ref", required=True, help="reference (airborne) recording")
    p.add_argument("--in", dest="inp", required=True, help="device recording")
    p.add_argument("--normalize", action="store_true", help="peak-normalize both signals first")
    p.add_argument("--fft-size", type=int, default=512)
    p.add_argument("--horizon", type=int, default=16384, help="samples per analysis horizon")


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="ebenkit", description="Multiband speech enhancement toolkit")
    sub = root.add_subparsers(dest="command", required=True)

    pq = sub.add_parser("pqmf", help="filter bank design and round trip").add_subparsers(dest="action", required=True)
    p = pq.add_parser("design")
    _bank_flags(p)
    p.add_argument("--out", help="write the text design report here")
    p.set_defaults(func=cmd_pqmf_design)
    p = pq.add_parser("roundtrip")
    _bank_flags(p)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pqmf_roundtrip)

    dg = sub.add_parser("degrade", help="in-ear degradation simulation").add_subparsers(dest="action", required=True)
    for name, func in (("fixed", cmd_degrade_fixed), ("random", cmd_degrade_random)):
        p = dg.add_parser(name)
        p.add_argument("--in", dest="inp", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=_seed, required=True)
        _enc_flag(p)
        if name == "random":
            p.add_argument("--bounds", help="CSV envelope (lower_db/upper_db or p10_db/p90_db)")
        p.set_defaults(func=func)
    p = dg.add_parser("batch")
    p.add_argument("--in", dest="inp", required=True, help="input directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=_seed, required=True, help="master seed")
    p.add_argument("--pipeline", choices=("fixed", "random"), default="fixed")
    p.add_argument("--bounds")
    p.add_argument("--workers", type=int, default=1)
    _enc_flag(p)
    p.set_defaults(func=cmd_degrade_batch)

    si = sub.add_parser("sysid", help="transfer function and coherence").add_subparsers(dest="action", required=True)
    p = si.add_parser("estimate")
    _sysid_flags(p)
    p.add_argument("--out", required=True, help="CSV output")
    p.add_argument("--vad-threshold", type=float, default=sysid.DEFAULT_VAD_THRESHOLD_DB)
    p.set_defaults(func=cmd_sysid_estimate)
    p = si.add_parser("coherence")
    _sysid_flags(p)
    p.add_argument("--out", help="CSV output")
    p.set_defaults(func=cmd_sysid_coherence)

    wt = sub.add_parser("weights", help="weight files").add_subparsers(dest="action", required=True)
    p = wt.add_parser("init")
    p.add_argument("--config")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config-out", help="also write the effective config JSON")
    p.set_defaults(func=cmd_weights_init)
    p = wt.add_parser("inspect")
    p.add_argument("--weights", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_weights_inspect)

    p = sub.add_parser("enhance", help="run the generator")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--weights", required=True)
    _enc_flag(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("disc-forward", help="run the discriminators")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--config")
    p.add_argument("--weights", required=True)
    p.set_defaults(func=cmd_disc_forward)

    ls = sub.add_parser("loss", help="losses").add_subparsers(dest="action", required=True)
    p = ls.add_parser("eval")
    p.add_argument("--ref", required=True, help="real signal")
    p.add_argument("--in", dest="inp", required=True, help="generated signal")
    p.add_argument("--config")
    p.add_argument("--weights", required=True)
    p.set_defaults(func=cmd_loss_eval)

    p = sub.add_parser("metrics", help="SI-SDR and SER")
    p.add_argument("--in", dest="inp", required=True, help="estimate")
    p.add_argument("--ref", required=True)
    p.add_argument("--delay", type=int, default=0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="generator latency")
    p.add_argument("--config")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--backend", choices=("python", "compiled"))
    p.set_defaults(func=cmd_bench)
    return root


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _diag(str(exc))
        return EXIT_USAGE
    try:
        code = args.func(args)
    except (EbenError, OSError, RuntimeError) as exc:
        _diag(f"{type(exc).__name__}: {exc}")
        return EXIT_DATA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
