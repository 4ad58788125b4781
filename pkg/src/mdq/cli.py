"""Command-line front end.

Subcommands: encode, decode, sweep, metrics, serve. All commands are
deterministic under a fixed --seed; the sweep worker pool is capped by
the MDQ_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import codec, imageio, metrics
from .reports import RdReport, format_report, write_csv
from .training import TrainConfig, parse_config


def _load_config(args) -> TrainConfig:
    cfg = TrainConfig()
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text())
    overrides = {}
    for flag, field in (
        ("alpha", "alpha"),
        ("lambda1", "lambda1"),
        ("lambda2", "lambda2"),
        ("iters", "iterations"),
        ("levels", "levels"),
        ("seed", "seed"),
        ("lr", "lr"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    return replace(cfg, **overrides) if overrides else cfg


def cmd_encode(args) -> int:
    image = imageio.load_image(args.image)
    cfg = _load_config(args)
    result = codec.encode_image(image, cfg)
    out1 = Path(f"{args.out}.mdq1")
    out2 = Path(f"{args.out}.mdq2")
    out1.write_bytes(result.description1)
    out2.write_bytes(result.description2)
    write_csv(f"{args.out}.report.csv", result.reports)
    for report in result.reports:
        print(format_report(report))
    print(f"wrote {out1} ({len(result.description1)} bytes), "
          f"{out2} ({len(result.description2)} bytes)")
    return 0


def cmd_decode(args) -> int:
    streams = [Path(args.in1).read_bytes()]
    if args.in2:
        streams.append(Path(args.in2).read_bytes())
    image, mode, bpp = codec.decode_bytes(streams)
    imageio.save_image(args.out, image)
    print(f"{mode}: {bpp:.4f} bpp -> {args.out}")
    return 0


def _sweep_point(task):
    image, cfg = task
    return codec.encode_image(image, cfg).reports


def cmd_sweep(args) -> int:
    image = imageio.load_image(args.image)
    cfg = _load_config(args)
    lambdas = [float(x) for x in args.lambdas.split(",") if x]
    alphas = [float(x) for x in args.alphas.split(",") if x]
    if not lambdas or not alphas:
        raise ValueError("sweep needs at least one lambda and one alpha")
    grid = [
        replace(cfg, lambda1=lam, lambda2=lam, alpha=alpha)
        for lam in lambdas
        for alpha in alphas
    ]
    workers = int(os.environ.get("MDQ_THREADS", "0")) or None
    rows = []
    if workers == 1 or len(grid) == 1:
        results = [_sweep_point((image, point)) for point in grid]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, [(image, point) for point in grid]))
    for reports in results:  # grid order regardless of completion order
        rows.extend(reports)
    write_csv(args.out_csv, rows)
    print(f"wrote {len(rows)} rows to {args.out_csv}")
    return 0


def cmd_metrics(args) -> int:
    ref = imageio.load_image(args.ref)
    test = imageio.load_image(args.test)
    print(f"psnr_db={metrics.psnr(ref, test):.6f}")
    print(f"ms_ssim={metrics.ms_ssim(ref, test):.6f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="overfit and write two description files")
    enc.add_argument("--image", required=True, help="input PPM/PGM/PNG image")
    enc.add_argument("--config", help="key=value config file")
    enc.add_argument("--alpha", type=float)
    enc.add_argument("--lambda1", type=float)
    enc.add_argument("--lambda2", type=float)
    enc.add_argument("--iters", type=int)
    enc.add_argument("--levels", type=int)
    enc.add_argument("--seed", type=int)
    enc.add_argument("--lr", type=float)
    enc.add_argument("--out", required=True, help="output prefix (.mdq1/.mdq2 appended)")
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", help="reconstruct from one or two descriptions")
    dec.add_argument("--in1", required=True)
    dec.add_argument("--in2")
    dec.add_argument("--out", required=True, help="output image path")
    dec.set_defaults(func=cmd_decode)

    swp = sub.add_parser("sweep", help="rate-distortion sweep over lambda/alpha grids")
    swp.add_argument("--image", required=True)
    swp.add_argument("--lambdas", required=True, help="comma-separated list")
    swp.add_argument("--alphas", required=True, help="comma-separated list")
    swp.add_argument("--out-csv", required=True)
    swp.add_argument("--config")
    swp.add_argument("--iters", type=int)
    swp.add_argument("--levels", type=int)
    swp.add_argument("--seed", type=int)
    swp.set_defaults(func=cmd_sweep)

    met = sub.add_parser("metrics", help="PSNR and MS-SSIM between two images")
    met.add_argument("--ref", required=True)
    met.add_argument("--test", required=True)
    met.set_defaults(func=cmd_metrics)

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
