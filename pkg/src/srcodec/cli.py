"""Command-line driver: encode, decode, sweep, analyze.

`sweep` runs the full pipeline over images x quality factors x cascade
counts and appends one CSV row per configuration plus a raw-sign baseline
row per (image, quality). Sweep items run in a process pool capped by the
SR_THREADS environment variable; rows are written in a fixed sort order
so identical plans produce identical CSVs apart from wall-clock times.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import codec, metrics
from .imagery import load_image, save_image
from .solver import (
    SolverConfig,
    alpha_constant,
    extract_signs,
    fienup_solve,
    sign_plane,
)
from .transforms import (
    build_quantizer,
    dct2_forward,
    dct2_inverse,
    dequantize_indices,
    quantize_indices,
)

DEFAULT_QUALITIES = (20, 30, 40, 50, 60, 70, 80)
DEFAULT_GAMMAS = (1, 2, 3)


def _solver_flags(p):
    p.add_argument("--gamma", type=int, default=1, help="cascade count (default 1)")
    p.add_argument("--theta", type=int, default=200, help="inner iterations (default 200)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="frame-domain soft threshold (default 1)")
    p.add_argument("--mu", type=float, default=0.01, help="anchor penalty (default 0.01)")
    p.add_argument("--levels", type=int, default=3, help="wavelet depth (default 3)")
    p.add_argument("--seed", type=int, default=0, help="anchor PRNG seed (default 0)")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="srcodec",
        description="DCT codec that recovers AC sign bits instead of transmitting them",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a PGM into a bitstream")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--quality", type=int, default=50, help="JPEG-style quality 1..100")
    _solver_flags(p)

    p = sub.add_parser("decode", help="reconstruct a PGM from a bitstream")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--verify", metavar="ORIGINAL",
                   help="re-encode this PGM and compare coefficient grids")

    p = sub.add_parser("sweep", help="rate/accuracy table over qualities and cascades")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--quality", type=_int_list, default=list(DEFAULT_QUALITIES),
                   help="comma-separated quality list (default 20,30,...,80)")
    p.add_argument("--gamma", type=_int_list, default=list(DEFAULT_GAMMAS),
                   help="comma-separated cascade counts (default 1,2,3)")
    p.add_argument("--theta", type=int, default=200)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=0.01)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", required=True, help="output CSV path")
    p.add_argument("--dump-images", metavar="DIR",
                   help="write baseline/random-sign/retrieved-sign reconstructions")

    p = sub.add_parser("analyze", help="print a bitstream header")
    p.add_argument("input")
    return parser


def _int_list(text):
    try:
        values = [int(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _validate_quality(q, parser):
    if not 1 <= q <= 100:
        parser.error(f"quality must be in [1, 100], got {q}")


def _config(args, gamma=None):
    return SolverConfig(
        lam=args.lam,
        mu=args.mu,
        theta_max=args.theta,
        gamma_max=args.gamma if gamma is None else gamma,
        seed=args.seed,
        levels=args.levels,
    )


def cmd_encode(args, parser):
    _validate_quality(args.quality, parser)
    img = load_image(args.input)
    cfg = _config(args)
    result = codec.encode(img, args.quality, cfg)
    with open(args.output, "wb") as f:
        f.write(result.stream)
    n_pixels = img.size
    residual = result.residual_bits
    ones = float(np.count_nonzero(residual)) / residual.size if residual.size else 0.0
    _, _, _, residual_payload = codec.parse_bitstream(result.stream)
    print(f"sign_count={residual.size}")
    print(f"one_fraction={ones!r}")
    print(f"entropy_bpp={metrics.residual_entropy_bpp(residual, n_pixels)!r}")
    print(f"coded_bpp={len(residual_payload) * 8 / n_pixels!r}")
    print(f"sign_accuracy={metrics.sign_accuracy(result.true_signs, result.retrieved_signs)!r}")
    for i, a in enumerate(result.alphas, start=1):
        print(f"alpha_cascade_{i}={a!r}")
    print(f"stream_bytes={len(result.stream)}")
    return 0


def cmd_decode(args, parser):
    with open(args.input, "rb") as f:
        data = f.read()
    result = codec.decode(data)
    save_image(args.output, result.pixels)
    print(f"width={result.header.width}")
    print(f"height={result.header.height}")
    print(f"quality={result.header.quality}")
    if args.verify:
        original = load_image(args.verify)
        if original.shape != result.real.shape:
            print(f"verify=FAIL shape {original.shape} vs {result.real.shape}")
            return 1
        q = build_quantizer(result.header.quality)
        expected = dequantize_indices(quantize_indices(dct2_forward(original), q), q)
        if np.array_equal(expected, result.coefficients):
            print("verify=OK")
        else:
            bad = int(np.count_nonzero(expected != result.coefficients))
            print(f"verify=FAIL {bad} coefficients differ")
            return 1
    return 0


def cmd_analyze(args, parser):
    with open(args.input, "rb") as f:
        data = f.read()
    header, mag_payload, residual_count, residual_payload = codec.parse_bitstream(data)
    for key in ("version", "width", "height", "quality", "gamma", "theta",
                "lam", "mu", "levels", "seed"):
        print(f"{key}={getattr(header, key)}")
    print(f"magnitude_payload_bytes={len(mag_payload)}")
    print(f"residual_bit_count={residual_count}")
    print(f"residual_payload_bytes={len(residual_payload)}")
    return 0


def _random_sign_plane(mags, seed):
    """Equiprobable random signs at every nonzero AC, for the ablation dump."""
    rng = np.random.Generator(np.random.PCG64(seed))
    signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=mags.shape)
    signs[mags == 0] = 0
    return signs


def _sweep_item(job):
    """Worker: one (image, quality) item; returns rows for every gamma."""
    path, name, quality, gammas, lam, mu, theta, levels, seed, dump_dir = job
    img = load_image(path)
    n_pixels = img.size
    q = build_quantizer(quality)
    idx = quantize_indices(dct2_forward(img), q)
    y = dequantize_indices(idx, q)
    mags = np.abs(y)
    dc = y[0::8, 0::8]
    baseline = dct2_inverse(y)
    baseline_u8 = codec.to_display(baseline)
    truth = sign_plane(y)
    sign_count = codec.count_nonzero_ac(mags)

    captured = {}
    alphas = []
    start = time.perf_counter()

    def hook(gamma, z):
        elapsed = time.perf_counter() - start
        a = None
        if np.linalg.norm(baseline) > 0 and np.linalg.norm(z) > 0:
            a = alpha_constant(baseline, z)
        alphas.append(a)
        captured[gamma] = (extract_signs(z, mags), elapsed)

    cfg = SolverConfig(lam=lam, mu=mu, theta_max=theta, gamma_max=max(gammas),
                       seed=seed, levels=levels)
    fienup_solve(mags, dc, cfg, cascade_hook=hook)

    rows = []
    raw_bpp = sign_count / n_pixels
    rows.append(metrics.EvalRecord(
        image=name, quality=quality, method="raw_signs", gamma=0,
        sign_count=sign_count, entropy_bpp=raw_bpp, coded_bpp=raw_bpp,
        wall_seconds=0.0,
    ))
    for gamma in gammas:
        retrieved, elapsed = captured[gamma]
        residual = codec.compute_residual(truth, retrieved)
        ones = (float(np.count_nonzero(residual)) / residual.size
                if residual.size else 0.0)
        coded = codec.arith_encode_bits(residual)
        recon = codec.to_display(
            dct2_inverse(codec.assemble_coefficients(mags, dc, retrieved)))
        rows.append(metrics.EvalRecord(
            image=name, quality=quality, method="sign_retrieval", gamma=gamma,
            sign_count=sign_count,
            one_fraction=ones,
            entropy_bpp=metrics.residual_entropy_bpp(residual, n_pixels),
            coded_bpp=len(coded) * 8 / n_pixels,
            sign_accuracy=1.0 - ones,
            psnr_retrieved_db=metrics.psnr(baseline_u8, recon),
            alphas=tuple(a for a in alphas[:gamma] if a is not None),
            wall_seconds=elapsed,
        ))
        if dump_dir:
            save_image(os.path.join(
                dump_dir, f"{name}_q{quality}_g{gamma}_retrieved.pgm"), recon)
    if dump_dir:
        save_image(os.path.join(dump_dir, f"{name}_q{quality}_baseline.pgm"),
                   baseline_u8)
        random_recon = codec.to_display(dct2_inverse(
            codec.assemble_coefficients(mags, dc, _random_sign_plane(mags, seed))))
        save_image(os.path.join(dump_dir, f"{name}_q{quality}_random.pgm"),
                   random_recon)
    return rows


def cmd_sweep(args, parser):
    for q in args.quality:
        _validate_quality(q, parser)
    for g in args.gamma:
        if g < 1:
            parser.error(f"gamma must be >= 1, got {g}")
    if args.dump_images:
        os.makedirs(args.dump_images, exist_ok=True)

    jobs = []
    for path in args.inputs:
        name = os.path.splitext(os.path.basename(path))[0]
        for quality in args.quality:
            jobs.append((path, name, quality, tuple(sorted(set(args.gamma))),
                         args.lam, args.mu, args.theta, args.levels, args.seed,
                         args.dump_images))

    workers = min(len(jobs), os.cpu_count() or 1)
    env_cap = os.environ.get("SR_THREADS")
    if env_cap:
        workers = max(1, min(workers, int(env_cap)))

    rows = []
    failed = 0
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_sweep_item, job): job for job in jobs}
            for fut, job in futures.items():
                try:
                    rows.extend(fut.result())
                except Exception as exc:
                    failed += 1
                    print(f"sweep item {job[1]} q={job[2]} failed: {exc}",
                          file=sys.stderr)
    else:
        for job in jobs:
            try:
                rows.extend(_sweep_item(job))
            except Exception as exc:
                failed += 1
                print(f"sweep item {job[1]} q={job[2]} failed: {exc}",
                      file=sys.stderr)

    rows.sort(key=lambda r: (r.image, r.quality, r.method != "raw_signs", r.gamma))
    metrics.write_csv(args.csv, rows)
    print(f"rows={len(rows)}")
    print(f"csv={args.csv}")
    return 1 if failed else 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "encode": cmd_encode,
        "decode": cmd_decode,
        "sweep": cmd_sweep,
        "analyze": cmd_analyze,
    }
    try:
        return handlers[args.command](args, parser)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return 1
    except (codec.FormatError, codec.ProtocolError, codec.DecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
