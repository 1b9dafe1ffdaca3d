"""Command-line surface: simulate, reconstruct, metrics, oracle-check,
bench, mask, export.

Exit codes (exhaustive):

* 0 - success
* 2 - parse, format, or dimension error (diagnostic on stderr)
* 3 - degenerate mask: some detector pixel receives no energy
* 4 - solver divergence (non-finite iterate)
* 5 - oracle-check tolerance breach

Flags take precedence over config-file values, which take precedence over
defaults.  ``CASSI_THREADS`` caps the worker count used for batch
reconstruction; it never changes numerical results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .core import CodedAperture, HSICube, Measurement, SceneConfig
from .cubefile import read_cube, write_cube, write_pgm
from .dense import (
    MAX_DENSE_ENTRIES,
    build_dense,
    cube_to_vec,
    dense_pinv,
    meas_to_vec,
)
from .errors import (
    CassiError,
    ConfigFileError,
    MaskDegenerate,
    NonFiniteValue,
)
from .operator import build_operator
from .recon import (
    InitStrategy,
    SolverConfig,
    TvPrior,
    gap_solve_with_stats,
)
from .simulate import NoiseSpec, add_shot_noise, crop_mask, gen_mask, repair_mask
from .metrics import evaluate

_ORACLE_TOL = 1e-10

_CONFIG_KEYS: dict[str, type] = {
    "height": int,
    "width": int,
    "bands": int,
    "shift_step": int,
    "wavelengths": "floats",  # type: ignore[dict-item]
    "iterations": int,
    "tv_weight": float,
    "tv_inner_iterations": int,
    "init": str,
    "crop_denoiser_input": bool,
    "convergence_tol": float,
    "shot_bits": int,
    "seed": int,
    "full_scale": float,
}


def parse_run_config(path: str) -> dict:
    """Parse a ``key = value`` run-config file; unknown keys are rejected."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigFileError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = line.partition("=")
            key = key.strip()
            text = text.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigFileError(f"{path}:{lineno}: unknown key {key!r}")
            kind = _CONFIG_KEYS[key]
            try:
                if kind is bool:
                    lowered = text.lower()
                    if lowered in ("true", "1", "yes", "on"):
                        values[key] = True
                    elif lowered in ("false", "0", "no", "off"):
                        values[key] = False
                    else:
                        raise ValueError(text)
                elif kind == "floats":
                    values[key] = tuple(
                        float(part) for part in text.split(",") if part.strip()
                    )
                else:
                    values[key] = kind(text)
            except ValueError:
                raise ConfigFileError(
                    f"{path}:{lineno}: bad value {text!r} for {key}"
                ) from None
    return values


def _resolve(name: str, flag_value, file_cfg: dict, default=None):
    if flag_value is not None:
        return flag_value
    if name in file_cfg:
        return file_cfg[name]
    return default


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _load_mask_plane(path: str) -> np.ndarray:
    arr, _ = read_cube(path)
    if arr.shape[0] != 1:
        raise ConfigFileError(f"{path}: mask files must have C = 1, got {arr.shape[0]}")
    return arr[0]


def _cross_check(file_cfg: dict, **derived: int) -> None:
    for key, value in derived.items():
        if key in file_cfg and file_cfg[key] != value:
            raise ConfigFileError(
                f"config file says {key} = {file_cfg[key]}, inputs imply {value}"
            )
    wavelengths = file_cfg.get("wavelengths")
    if wavelengths is not None and "bands" in derived:
        if len(wavelengths) != derived["bands"]:
            raise ConfigFileError(
                f"config file lists {len(wavelengths)} wavelengths for "
                f"{derived['bands']} bands"
            )


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    file_cfg = parse_run_config(args.config) if args.config else {}
    cube_arr, _ = read_cube(args.cube)
    mask_plane = _load_mask_plane(args.mask)
    nc, h, w = cube_arr.shape
    d = _resolve("shift_step", args.shift_step, file_cfg)
    if d is None:
        raise ConfigFileError("shift step not given (flag or config file)")
    _cross_check(file_cfg, height=h, width=w, bands=nc)
    config = SceneConfig(h, w, nc, d)
    mask = CodedAperture.from_array(mask_plane)
    op = build_operator(mask, config)
    cube = HSICube(config, cube_arr)
    meas = op.forward(cube)
    bits = _resolve("shot_bits", args.shot_noise_bits, file_cfg)
    if bits is not None:
        seed = _resolve("seed", args.seed, file_cfg, default=0)
        spec = NoiseSpec(
            shot_bits=bits, seed=seed, full_scale=file_cfg.get("full_scale")
        )
        meas = add_shot_noise(meas, spec)
    write_cube(args.out, meas.data, dtype=args.dtype)
    return 0


# --------------------------------------------------------------------------
# reconstruct


def _derive_recon_config(
    meas_plane: np.ndarray, mask_plane: np.ndarray, d: int
) -> SceneConfig:
    h, wp = meas_plane.shape
    mh, mw = mask_plane.shape
    if mh != h:
        raise ConfigFileError(
            f"measurement has {h} rows but mask has {mh}"
        )
    span = wp - mw
    if span < 0 or span % d != 0:
        raise ConfigFileError(
            f"measurement width {wp}, mask width {mw}, shift step {d}: "
            "band count (W' - W)/d + 1 is not a positive integer"
        )
    return SceneConfig(h, mw, span // d + 1, d)


def _reconstruct_one(op, meas, method, scfg):
    stats = None
    prior = TvPrior(scfg.tv_inner_iterations)
    if method == "pinv":
        x = op.pinv(meas)
    elif method == "gap-tv":
        x, stats = gap_solve_with_stats(op, meas, prior, scfg)
    elif method == "rnd-gap-tv":
        q, stats = gap_solve_with_stats(op, meas, prior, scfg)
        x = op.rnd_combine(meas, q)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigFileError(f"unknown method {method}")
    return x, stats


def cmd_reconstruct(args) -> int:
    file_cfg = parse_run_config(args.config) if args.config else {}
    d = _resolve("shift_step", args.shift_step, file_cfg)
    if d is None:
        raise ConfigFileError("shift step not given (flag or config file)")
    mask_plane = _load_mask_plane(args.mask)

    crop = None if not args.no_crop else False
    scfg = SolverConfig(
        iterations=_resolve("iterations", args.iters, file_cfg, default=60),
        tv_weight=_resolve("tv_weight", args.tv_weight, file_cfg, default=0.1),
        tv_inner_iterations=_resolve(
            "tv_inner_iterations", args.tv_iters, file_cfg, default=20
        ),
        init=InitStrategy.from_name(
            _resolve("init", args.init, file_cfg, default="roll")
        ),
        crop_denoiser_input=_resolve(
            "crop_denoiser_input", crop, file_cfg, default=True
        ),
        convergence_tol=_resolve(
            "convergence_tol", args.tol, file_cfg, default=0.0
        ),
    )

    meas_paths = args.meas
    multi = len(meas_paths) > 1
    if multi:
        if not os.path.isdir(args.out):
            raise ConfigFileError(
                f"--out must be an existing directory for {len(meas_paths)} inputs"
            )
        if args.report and not os.path.isdir(args.report):
            raise ConfigFileError("--report must be a directory for batch input")

    def run(meas_path: str) -> None:
        meas_arr, _ = read_cube(meas_path)
        if meas_arr.shape[0] != 1:
            raise ConfigFileError(
                f"{meas_path}: measurement files must have C = 1"
            )
        config = _derive_recon_config(meas_arr[0], mask_plane, d)
        _cross_check(
            file_cfg,
            height=config.height,
            width=config.width,
            bands=config.bands,
        )
        mask = CodedAperture.from_array(mask_plane)
        op = build_operator(mask, config)
        meas = Measurement(config, meas_arr[0])
        started = time.perf_counter()
        x, stats = _reconstruct_one(op, meas, args.method, scfg)
        elapsed = time.perf_counter() - started
        if multi:
            stem = os.path.splitext(os.path.basename(meas_path))[0]
            out_path = os.path.join(args.out, f"{stem}.recon.hsic")
        else:
            out_path = args.out
        write_cube(out_path, x.data, dtype=args.dtype)
        if args.report:
            resid = op.forward(x).data - meas.data
            r_inf = float(np.max(np.abs(resid)))
            y_inf = float(np.max(np.abs(meas.data)))
            pairs = [
                ("command", "reconstruct"),
                ("input", meas_path),
                ("output", out_path),
                ("method", args.method),
                ("height", config.height),
                ("width", config.width),
                ("bands", config.bands),
                ("shift_step", config.shift_step),
                ("iterations", scfg.iterations),
                ("tv_weight", repr(scfg.tv_weight)),
                ("tv_inner_iterations", scfg.tv_inner_iterations),
                ("init", scfg.init.value),
                ("crop_denoiser_input", str(scfg.crop_denoiser_input).lower()),
                ("convergence_tol", repr(scfg.convergence_tol)),
                ("residual_inf", repr(r_inf)),
                ("residual_inf_rel", repr(r_inf / y_inf if y_inf > 0 else r_inf)),
                ("residual_l2", repr(float(np.linalg.norm(resid)))),
                ("iterations_run", stats.iterations_run if stats else 0),
                (
                    "denoised_pixels_per_iteration",
                    stats.denoised_pixels_per_iteration if stats else 0,
                ),
                ("wall_time_s", repr(elapsed)),
            ]
            if multi:
                stem = os.path.splitext(os.path.basename(meas_path))[0]
                report_path = os.path.join(args.report, f"{stem}.report.txt")
            else:
                report_path = args.report
            _atomic_write_text(
                report_path, "".join(f"{k} {v}\n" for k, v in pairs)
            )

    try:
        if multi:
            workers = max(1, int(os.environ.get("CASSI_THREADS", "1")))
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, meas_paths))
        else:
            run(meas_paths[0])
    except NonFiniteValue as exc:
        _fail(f"solver diverged: {exc}")
        return 4
    return 0


# --------------------------------------------------------------------------
# metrics


def cmd_metrics(args) -> int:
    ref_arr, _ = read_cube(args.ref)
    test_arr, _ = read_cube(args.test)
    if ref_arr.shape != test_arr.shape:
        raise ConfigFileError(
            f"shape mismatch: {ref_arr.shape} vs {test_arr.shape}"
        )
    nc, h, w = ref_arr.shape
    config = SceneConfig(h, w, nc, 1)
    report = evaluate(HSICube(config, ref_arr), HSICube(config, test_arr))
    if args.format == "json":
        print(
            json.dumps(
                {
                    "psnr_db": report.psnr_db,
                    "ssim": report.ssim,
                    "mse": report.mse,
                    "per_band_psnr": list(report.per_band_psnr),
                    "per_band_ssim": list(report.per_band_ssim),
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print("band,psnr_db,ssim,mse")
        for c in range(nc):
            band_mse = float(
                np.mean(
                    (
                        np.clip(ref_arr[c], 0.0, 1.0)
                        - np.clip(test_arr[c], 0.0, 1.0)
                    )
                    ** 2
                )
            )
            print(
                f"{c},{report.per_band_psnr[c]!r},"
                f"{report.per_band_ssim[c]!r},{band_mse!r}"
            )
        print(f"mean,{report.psnr_db!r},{report.ssim!r},{report.mse!r}")
    return 0


# --------------------------------------------------------------------------
# oracle-check


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.linalg.norm(b))
    if scale == 0.0:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b)) / scale


def cmd_oracle_check(args) -> int:
    config = SceneConfig(args.height, args.width, args.bands, args.shift_step)
    rng = np.random.Generator(np.random.Philox(args.seed))
    mask = repair_mask(
        gen_mask(args.height, args.width, 0.7, seed=args.seed), config
    )
    op = build_operator(mask, config)
    if args.corrupt_sigma:
        # Fault-injection hook for the exit-code contract: perturb one
        # reciprocal Gram entry so pinv disagrees with the dense oracle.
        tampered = op.inv_sigma.copy()
        tampered[0, tampered.shape[1] // 2] *= 1.01
        tampered.setflags(write=False)
        object.__setattr__(op, "inv_sigma", tampered)

    dense = build_dense(op)
    dpinv = dense_pinv(dense)

    h, w, nc, _ = config.geometry
    wp = config.measurement_width()
    x = HSICube(config, rng.random((nc, h, w)))
    q = HSICube(config, rng.random((nc, h, w)))
    y = Measurement(config, rng.random((h, wp)))
    xv = cube_to_vec(x)
    qv = cube_to_vec(q)
    yv = meas_to_vec(y)

    errs = {
        "phi_apply": _rel_err(meas_to_vec(op.forward(x)), dense @ xv),
        "phi_t_apply": _rel_err(cube_to_vec(op.adjoint(y)), dense.T @ yv),
        "pinv_apply": _rel_err(cube_to_vec(op.pinv(y)), dpinv @ yv),
        "range_project": _rel_err(
            cube_to_vec(op.range_project(x)), dpinv @ (dense @ xv)
        ),
        "null_project": _rel_err(
            cube_to_vec(op.null_project(x)), xv - dpinv @ (dense @ xv)
        ),
        "rnd_combine": _rel_err(
            cube_to_vec(op.rnd_combine(y, q)),
            dpinv @ yv + qv - dpinv @ (dense @ qv),
        ),
    }
    for name, err in errs.items():
        print(f"{name}_rel_err {err:.3e}")
    worst = max(errs, key=errs.get)
    if errs[worst] > _ORACLE_TOL:
        _fail(
            f"{worst} exceeds tolerance: {errs[worst]:.3e} > {_ORACLE_TOL:.0e}"
        )
        return 5
    return 0


# --------------------------------------------------------------------------
# bench


def _percentile(sorted_ms: list[float], fraction: float) -> float:
    idx = min(len(sorted_ms) - 1, int(np.ceil(fraction * len(sorted_ms))) - 1)
    return sorted_ms[max(idx, 0)]


def cmd_bench(args) -> int:
    config = SceneConfig(args.height, args.width, args.bands, args.shift_step)
    mask = repair_mask(gen_mask(args.height, args.width, 0.5, seed=0), config)
    op = build_operator(mask, config)
    h, w, nc, _ = config.geometry
    rng = np.random.Generator(np.random.Philox(7))
    cube = HSICube(config, rng.random((nc, h, w)))
    meas = op.forward(cube)
    zero_q = HSICube(config, np.zeros((nc, h, w)))

    targets = {
        "phi_apply": lambda: op.forward(cube),
        "pinv_apply": lambda: op.pinv(meas),
        "rnd_combine": lambda: op.rnd_combine(meas, zero_q),
    }
    print(f"height {config.height}")
    print(f"width {config.width}")
    print(f"bands {config.bands}")
    print(f"shift_step {config.shift_step}")
    print(f"reps {args.reps}")
    print(f"operator_bytes {op.nbytes()}")
    for name, fn in targets.items():
        times = []
        for _ in range(args.reps):
            t0 = time.perf_counter()
            fn()
            times.append((time.perf_counter() - t0) * 1e3)
        times.sort()
        if args.reps == 1:
            print(f"{name}_ms {times[0]:.3f}")
        else:
            median = times[len(times) // 2]
            print(f"{name}_median_ms {median:.3f}")
            print(f"{name}_p95_ms {_percentile(times, 0.95):.3f}")
    return 0


# --------------------------------------------------------------------------
# mask


def cmd_mask_gen(args) -> int:
    mask = gen_mask(args.height, args.width, args.density, args.seed)
    if (args.full_rank_bands is None) != (args.full_rank_step is None):
        raise ConfigFileError(
            "--full-rank-bands and --full-rank-step must be given together"
        )
    if args.full_rank_bands is not None:
        config = SceneConfig(
            args.height, args.width, args.full_rank_bands, args.full_rank_step
        )
        mask = repair_mask(mask, config)
    write_cube(args.out, mask.data, dtype=args.dtype)
    return 0


def cmd_mask_crop(args) -> int:
    plane = _load_mask_plane(args.mask)
    cropped = crop_mask(CodedAperture.from_array(plane), args.size, args.seed)
    write_cube(args.out, cropped.data, dtype=args.dtype)
    return 0


# --------------------------------------------------------------------------
# export


def cmd_export(args) -> int:
    arr, _ = read_cube(args.cube)
    os.makedirs(args.out_dir, exist_ok=True)
    bands = range(arr.shape[0]) if args.band is None else [args.band]
    for c in bands:
        if not 0 <= c < arr.shape[0]:
            raise ConfigFileError(f"band {c} outside [0, {arr.shape[0]})")
        write_pgm(os.path.join(args.out_dir, f"{args.prefix}band_{c:03d}.pgm"), arr[c])
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cassi",
        description=(
            "Matrix-free simulation and reconstruction for coded-aperture "
            "snapshot spectral imaging."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="form a measurement from a cube and mask")
    p.add_argument("--cube", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--shift-step", type=int)
    p.add_argument("--shot-noise-bits", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="recover a cube from a measurement")
    p.add_argument("--meas", required=True, nargs="+")
    p.add_argument("--mask", required=True)
    p.add_argument("--shift-step", type=int)
    p.add_argument(
        "--method", required=True, choices=("pinv", "gap-tv", "rnd-gap-tv")
    )
    p.add_argument("--iters", type=int)
    p.add_argument("--tv-weight", type=float)
    p.add_argument("--tv-iters", type=int)
    p.add_argument("--init", choices=("shift", "repeat", "roll"))
    p.add_argument("--no-crop", action="store_true")
    p.add_argument("--tol", type=float)
    p.add_argument("--config")
    p.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("metrics", help="PSNR/SSIM between two cube files")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser(
        "oracle-check",
        help="compare the matrix-free operator with the dense SVD oracle",
    )
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--bands", type=int, required=True)
    p.add_argument("--shift-step", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--corrupt-sigma", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("bench", help="time the operator kernels")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--bands", type=int, required=True)
    p.add_argument("--shift-step", type=int, required=True)
    p.add_argument("--reps", type=int, default=20)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("mask", help="generate or crop coded apertures")
    msub = p.add_subparsers(dest="mask_command", required=True)

    g = msub.add_parser("gen", help="seeded Bernoulli mask")
    g.add_argument("--height", type=int, required=True)
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--density", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument(
        "--full-rank-bands",
        type=int,
        help="repair the mask so an operator with this band count builds",
    )
    g.add_argument("--full-rank-step", type=int)
    g.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_mask_gen)

    g = msub.add_parser("crop", help="seeded random square crop")
    g.add_argument("--mask", required=True)
    g.add_argument("--size", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_mask_crop)

    p = sub.add_parser("export", help="write bands as 8-bit PGM images")
    p.add_argument("--cube", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--band", type=int)
    p.add_argument("--prefix", default="")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MaskDegenerate as exc:
        _fail(str(exc))
        return 3
    except (CassiError, ValueError, OSError) as exc:
        _fail(str(exc))
        return 2


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
