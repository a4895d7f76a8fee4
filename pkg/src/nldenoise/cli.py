"""Command-line entry point wiring the toolkit's workflows.

Subcommands: add-noise, search, denoise, train, eval, bench.  Every command
is deterministic given its flags and seeds, exits 0 on success and prints a
single-line diagnostic with a nonzero status on any error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .bench import run_bench
from .features import gather_features, nl_pixel_mean
from .metrics import sequence_metrics
from .network import Network, NetworkConfig, load_weights, save_weights
from .noise import NoiseSpec
from .pipeline import denoise_sequence
from .search import SearchConfig, load_match_table, save_match_table, search_fast
from .synthetic import make_translating_clip
from .training import TrainConfig, log_to_csv, train
from .video import Video, frame_paths, read_sequence, write_sequence

_NOISE_NAMES = {"awgn": "awgn", "box": "box_correlated", "sp": "salt_pepper_uniform"}


def _load_dir(directory: str) -> Video:
    paths = frame_paths(directory)
    if not paths:
        raise ValueError(f"no .pgm/.ppm frames in {directory}")
    return read_sequence(paths)


def _noise_spec(args) -> NoiseSpec:
    kind = _NOISE_NAMES[args.noise]
    if kind in ("awgn", "box_correlated"):
        if args.sigma is None:
            raise ValueError(f"--sigma is required for --noise {args.noise}")
        return NoiseSpec(kind=kind, sigma=args.sigma, seed=args.seed)
    if args.fraction is None:
        raise ValueError("--fraction is required for --noise sp")
    return NoiseSpec(kind=kind, fraction=args.fraction, seed=args.seed)


def _add_noise_flags(p):
    p.add_argument("--noise", choices=sorted(_NOISE_NAMES), required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)


def _add_search_flags(p):
    p.add_argument("--patch-size", type=int, default=41)
    p.add_argument("--spatial-window", type=int, default=41)
    p.add_argument("--temporal-window", type=int, default=15)
    p.add_argument("--neighbors", type=int, default=None,
                   help="match count; defaults to the temporal window in "
                        "one_per_frame mode")
    p.add_argument("--mode", choices=("free", "one_per_frame"),
                   default="one_per_frame")
    p.add_argument("--oracle", metavar="CLEAN_DIR", default=None,
                   help="search on this clean sequence (values stay noisy)")


def _search_cfg(args, video: Video) -> SearchConfig:
    n = args.neighbors
    if n is None:
        n = args.temporal_window if args.mode == "one_per_frame" else 15
    guide = None
    if args.oracle is not None:
        guide = _load_dir(args.oracle)
        if guide.shape != video.shape:
            raise ValueError(
                f"oracle sequence shape {guide.shape} != input {video.shape}"
            )
    return SearchConfig(
        patch_size=args.patch_size,
        spatial_window=args.spatial_window,
        temporal_window=args.temporal_window,
        num_neighbors=n,
        mode=args.mode,
        oracle_guide=guide,
    )


def cmd_add_noise(args) -> int:
    spec = _noise_spec(args)
    video = _load_dir(args.input)
    noisy = spec.apply(video)
    write_sequence(noisy, args.output)
    with open(os.path.join(args.output, "noise_spec.txt"), "w") as f:
        f.write(f"kind={spec.kind}\n")
        if spec.sigma is not None:
            f.write(f"sigma={spec.sigma!r}\n")
        if spec.fraction is not None:
            f.write(f"fraction={spec.fraction!r}\n")
        f.write(f"seed={spec.seed}\n")
    print(f"wrote {noisy.frames} noisy frames to {args.output}")
    return 0


def cmd_search(args) -> int:
    video = _load_dir(args.input)
    cfg = _search_cfg(args, video)
    table = search_fast(video, cfg)
    save_match_table(table, args.output)
    print(
        f"wrote match table ({table.n} matches/pixel, mode {table.mode}) "
        f"to {args.output}"
    )
    return 0


def cmd_denoise(args) -> int:
    noisy = _load_dir(args.input)
    cfg = _search_cfg(args, noisy)
    if args.baseline == "nl-mean":
        if args.matches:
            table = load_match_table(args.matches)
        else:
            table = search_fast(noisy, cfg)
        out = Video(nl_pixel_mean(gather_features(noisy, table)))
    else:
        net = load_weights(args.weights)
        if args.matches:
            table = load_match_table(args.matches)
            feats = gather_features(noisy, table).data
            frames = np.empty_like(noisy.data)
            for t in range(noisy.frames):
                frames[t] = noisy.data[t] - net.forward(feats[t : t + 1])[0]
            out = Video(frames)
        else:
            out = denoise_sequence(noisy, net, cfg)
    write_sequence(out, args.output)
    print(f"wrote {out.frames} denoised frames to {args.output}")
    return 0


def _parse_config_file(path: str) -> dict[str, str]:
    values = {}
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected KEY = VALUE")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _parse_schedule(text: str):
    entries = []
    for part in text.split(","):
        epoch, rate = part.split(":")
        entries.append((int(epoch), float(rate)))
    return tuple(entries)


def _load_clips(directory: str) -> list[Video]:
    subdirs = sorted(
        os.path.join(directory, d)
        for d in os.listdir(directory)
        if os.path.isdir(os.path.join(directory, d))
    )
    if subdirs:
        return [_load_dir(d) for d in subdirs]
    return [_load_dir(directory)]


def cmd_train(args) -> int:
    raw = _parse_config_file(args.config)

    def get(key, default=None, cast=str):
        if key in raw:
            return cast(raw[key])
        if default is None:
            raise ValueError(f"{args.config}: missing required key {key!r}")
        return default

    clips = _load_clips(get("train_dir"))
    val_clips = _load_clips(raw["val_dir"]) if "val_dir" in raw else None
    channels = clips[0].channels

    kind = _NOISE_NAMES[get("noise", "awgn")]
    noise = NoiseSpec(
        kind=kind,
        sigma=float(raw["sigma"]) if "sigma" in raw else None,
        fraction=float(raw["fraction"]) if "fraction" in raw else None,
        seed=get("seed", 0, int),
    )
    mode = get("mode", "one_per_frame")
    wt = get("temporal_window", 15, int)
    n = get("num_neighbors", wt if mode == "one_per_frame" else 15, int)
    search = SearchConfig(
        patch_size=get("patch_size", 41, int),
        spatial_window=get("spatial_window", 41, int),
        temporal_window=wt,
        num_neighbors=n,
        mode=mode,
    )
    no_patch = get("no_patch", "0") in ("1", "true", "yes")
    network = NetworkConfig(
        in_channels=channels if no_patch else n * channels,
        out_channels=channels,
        stage1_width=get("stage1_width", 32, int),
        stage1_depth=get("stage1_depth", 4, int),
        trunk_width=get("trunk_width", 64, int),
        trunk_depth=get("trunk_depth", 14, int),
        no_patch=no_patch,
    )
    cfg = TrainConfig(
        noise=noise,
        search=search,
        network=network,
        crop_size=get("crop_size", 44, int),
        batch_size=get("batch_size", 128, int),
        batches_per_epoch=get("batches_per_epoch", 14000, int),
        epochs=get("epochs", 20, int),
        lr_schedule=_parse_schedule(get("lr_schedule", "0:1e-3,12:1e-4,17:1e-6")),
        seed=get("seed", 0, int),
    )

    def progress(row):
        print(
            f"epoch {row.epoch:3d}  lr {row.lr:g}  loss {row.train_loss:.4f}  "
            f"val_psnr {row.val_psnr:.2f}",
            flush=True,
        )

    net, log = train(clips, cfg, val_videos=val_clips, progress=progress)
    weights_out = get("weights_out", "weights.nldw")
    save_weights(net, weights_out)
    log_out = get("log_out", "train_log.csv")
    with open(log_out, "w") as f:
        f.write(log_to_csv(log))
    print(f"wrote weights to {weights_out} and log to {log_out}")
    return 0


def cmd_eval(args) -> int:
    clean = _load_dir(args.clean)
    test = _load_dir(args.test)
    report = sequence_metrics(clean, test, with_ssim=not args.no_ssim)
    print(report.format_table())
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.to_csv())
    return 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.patch_sizes.split(",")]
    clip = make_translating_clip(
        args.seed, args.frames, args.rows, args.cols, velocity=(1, 0)
    )
    result = run_bench(
        clip,
        sizes,
        spatial_window=args.spatial_window,
        temporal_window=args.temporal_window,
        band_rows=args.band_rows,
        reps=args.reps,
    )
    csv = result.to_csv()
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(csv)
    print(csv, end="")
    print(
        f"log-log slope: naive {result.slope_naive:.3f}, "
        f"fast {result.slope_fast:.3f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nldenoise",
        description="Non-local patch-search video denoising toolkit",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap compiled-kernel worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-noise", help="corrupt a sequence with seeded noise")
    p.add_argument("input", help="directory of PGM/PPM frames")
    p.add_argument("output", help="output directory")
    _add_noise_flags(p)
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("search", help="precompute a match table to a file")
    p.add_argument("input")
    p.add_argument("output", help="match table file")
    _add_search_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("denoise", help="denoise a sequence with trained weights")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--weights", default=None)
    p.add_argument("--baseline", choices=("nl-mean",), default=None,
                   help="emit the non-local pixel mean instead of the network")
    p.add_argument("--matches", default=None, help="precomputed match table file")
    _add_search_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("train", help="train from a flat key=value config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM of a sequence against a reference")
    p.add_argument("clean")
    p.add_argument("test")
    p.add_argument("--csv", default=None)
    p.add_argument("--no-ssim", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time both search implementations")
    p.add_argument("--patch-sizes", default="9,21,41")
    p.add_argument("--frames", type=int, default=15)
    p.add_argument("--rows", type=int, default=128)
    p.add_argument("--cols", type=int, default=128)
    p.add_argument("--spatial-window", type=int, default=41)
    p.add_argument("--temporal-window", type=int, default=15)
    p.add_argument("--band-rows", type=int, default=12)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "denoise" and args.baseline is None and args.weights is None:
        parser.error("denoise requires --weights unless --baseline is given")
    if args.threads is not None:
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
