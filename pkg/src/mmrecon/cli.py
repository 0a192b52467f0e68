"""Command-line harness: a thin client of the reconstruction service.

Every subcommand builds a JSON request, sends it to the service (an
in-process ASGI transport by default, or a live server via --server),
and writes the returned grids/tables under --out. Grid payloads are
base64-encoded GridFile bytes, so files written here are bit-identical
to what the core produces.

Settings resolve as defaults < config file < command-line flags, and the
resolved key=value config is copied into the output directory, so any run
is reproducible from its config file alone.
"""

from __future__ import annotations

import argparse
import base64
import sys
from pathlib import Path
from typing import Optional

import httpx

from .errors import MmreconError
from .grids import ComplexImage, DisplacementField, KSpace, SamplingMask
from .gridio import export_png, grid_bytes, grid_from_bytes, write_metrics_csv
from .metrics import MetricReport

def _parse_schedule(text: str) -> list:
    """Parse 'sigma:margin,sigma:margin,...' into [(sigma, margin), ...]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        sigma, _, margin = part.partition(":")
        out.append((float(sigma), float(margin)))
    if not out:
        raise ValueError("empty schedule")
    return out


SOLVER_KEYS = {
    "stages": int,
    "alpha": float,
    "lam": float,
    "eta": float,
    "beta1": float,
    "beta2": float,
    "prox_inner": int,
    "align_substeps": int,
    "align_warmup_stages": int,
    "align_min_decrease": float,
    "smooth_sigma": float,
    "align_schedule": _parse_schedule,
    "eps": float,
    "delta": float,
}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


CONFIG_KEYS = {
    **SOLVER_KEYS,
    "width": int,
    "height": int,
    "size": int,
    "acceleration": float,
    "pattern": str,
    "center_alloc": float,
    "noise_sigma": float,
    "sigma": float,
    "seed": int,
    "seeds": int,
    "out": str,
    "server": str,
    "kspace": str,
    "mask": str,
    "ref": str,
    "gt": str,
    "image": str,
    "truth": str,
    "label": str,
    "data_range": float,
    "axis": str,
    "values": str,
    "modes": str,
    "no_align": _parse_bool,
    "no_ref": _parse_bool,
}

DEFAULTS = {
    "size": 128,
    "width": 320,
    "acceleration": 4.0,
    "pattern": "equispaced",
    "center_alloc": 0.32,
    "noise_sigma": 0.0,
    "sigma": 0.0,
    "seed": 0,
    "seeds": 10,
    "label": "image",
    "axis": "sigma",
    "values": "0,1,2",
    "modes": "multi_align,multi_noalign,single,zero_filled",
    "no_align": False,
    "no_ref": False,
}


class UsageError(Exception):
    """Bad flags or config; exits with code 1."""


class CliParser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def parse_config_file(path: str) -> dict:
    settings = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            settings[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return settings


def resolve_settings(args: argparse.Namespace, flag_keys: list[str]) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(parse_config_file(args.config))
    for key in flag_keys:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def write_config_copy(out_dir: Path, command: str, settings: dict) -> None:
    lines = [f"# mmrecon {command}"]
    for key in sorted(settings):
        value = settings[key]
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif key == "align_schedule":
            value = ",".join(f"{s:g}:{m:g}" for s, m in value)
        lines.append(f"{key}={value}")
    (out_dir / "config.txt").write_text("\n".join(lines) + "\n")


class ServiceClient:
    """HTTP client; serves requests in-process when no server URL is given."""

    def __init__(self, server: Optional[str]):
        if server:
            self._client = httpx.Client(base_url=server, timeout=3600.0)
        else:
            from starlette.testclient import TestClient

            from .service.app import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code == 422:
            detail = response.json().get("detail", response.text)
            raise UsageError(f"{path}: {detail}")
        if response.status_code != 200:
            raise RuntimeError(f"{path}: service error {response.status_code}: {response.text}")
        return response.json()

    def close(self) -> None:
        self._client.close()


def _read_grid_b64(path: str) -> str:
    blob = Path(path).read_bytes()
    grid_from_bytes(blob)  # validate before shipping
    return base64.b64encode(blob).decode("ascii")


def _write_grid_b64(path: Path, b64: str) -> None:
    path.write_bytes(base64.b64decode(b64))


def _decode_b64(b64: str):
    return grid_from_bytes(base64.b64decode(b64))


def _out_dir(settings: dict, args) -> Path:
    out = getattr(args, "out", None) or settings.get("out")
    if not out:
        raise UsageError("--out DIR is required")
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _solver_payload(settings: dict) -> dict:
    return {key: settings[key] for key in SOLVER_KEYS if key in settings}


def _require(settings: dict, key: str, flag: str) -> str:
    value = settings.get(key)
    if not value:
        raise UsageError(f"{flag} is required (flag or config key '{key}')")
    return value


def _trace_csv(trace_rows: list[dict], path: Path) -> None:
    lines = ["stage,data_fidelity,psi,tv,psnr,alpha_used"]
    for row in trace_rows:
        psnr = "" if row["psnr"] is None else f"{row['psnr']:.6f}"
        lines.append(
            f"{row['stage']},{row['data_fidelity']:.10e},{row['psi']:.10e},"
            f"{row['tv']:.10e},{psnr},{row['alpha_used']:.10e}"
        )
    path.write_bytes(("\n".join(lines) + "\n").encode())


def _sweep_rows_csv(rows: list[dict], path: Path) -> None:
    lines = ["axis,value,mode,seed,psnr,ssim,mae"]
    for r in rows:
        lines.append(
            f"{r['axis']},{r['value']:g},{r['mode']},{r['seed']},"
            f"{r['psnr']:.6f},{r['ssim']:.6f},{r['mae']:.6f}"
        )
    path.write_bytes(("\n".join(lines) + "\n").encode())


def _sweep_summary_csv(rows: list[dict], path: Path) -> None:
    lines = [
        "axis,value,mode,n_seeds,psnr_mean,psnr_std,ssim_mean,ssim_std,mae_mean,mae_std"
    ]
    for r in rows:
        lines.append(
            f"{r['axis']},{r['value']:g},{r['mode']},{r['n_seeds']},"
            f"{r['psnr_mean']:.6f},{r['psnr_std']:.6f},{r['ssim_mean']:.6f},"
            f"{r['ssim_std']:.6f},{r['mae_mean']:.6f},{r['mae_std']:.6f}"
        )
    path.write_bytes(("\n".join(lines) + "\n").encode())


def cmd_mask(args, client: ServiceClient) -> int:
    settings = resolve_settings(args, ["width", "height", "acceleration", "pattern", "center_alloc", "seed"])
    out_dir = _out_dir(settings, args)
    height = settings.get("height", settings["width"])
    payload = {
        "width": settings["width"],
        "height": height,
        "acceleration": settings["acceleration"],
        "center_alloc": settings["center_alloc"],
        "pattern": settings["pattern"],
        "seed": settings["seed"],
    }
    result = client.post("/mask", payload)
    _write_grid_b64(out_dir / "mask.grid", result["mask_b64"])
    export_png(_decode_b64(result["mask_b64"]), out_dir / "mask.png")
    settings["height"] = height
    settings["out"] = str(out_dir)
    write_config_copy(out_dir, "mask", settings)
    print(
        f"mask: {result['total_columns']} sampled columns "
        f"({result['low_frequency_columns']} low-frequency) -> {out_dir}"
    )
    return 0


def cmd_phantom(args, client: ServiceClient) -> int:
    settings = resolve_settings(args, ["size", "seed"])
    out_dir = _out_dir(settings, args)
    result = client.post("/phantom", {"size": settings["size"], "seed": settings["seed"]})
    _write_grid_b64(out_dir / "target.grid", result["target_b64"])
    _write_grid_b64(out_dir / "reference.grid", result["reference_b64"])
    export_png(_decode_b64(result["target_b64"]), out_dir / "target.png")
    export_png(_decode_b64(result["reference_b64"]), out_dir / "reference.png")
    settings["out"] = str(out_dir)
    write_config_copy(out_dir, "phantom", settings)
    print(f"phantom: target + reference ({settings['size']}x{settings['size']}) -> {out_dir}")
    return 0


def cmd_misalign(args, client: ServiceClient) -> int:
    settings = resolve_settings(args, ["ref", "sigma", "seed"])
    out_dir = _out_dir(settings, args)
    ref_path = _require(settings, "ref", "--ref")
    payload = {
        "reference_b64": _read_grid_b64(ref_path),
        "sigma": settings["sigma"],
        "seed": settings["seed"],
    }
    result = client.post("/misalign", payload)
    _write_grid_b64(out_dir / "warped.grid", result["warped_b64"])
    _write_grid_b64(out_dir / "field.grid", result["field_b64"])
    export_png(_decode_b64(result["warped_b64"]), out_dir / "warped.png")
    settings["out"] = str(out_dir)
    write_config_copy(out_dir, "misalign", settings)
    print(f"misalign: sigma={settings['sigma']} -> {out_dir}")
    return 0


def cmd_acquire(args, client: ServiceClient) -> int:
    settings = resolve_settings(args, ["image", "mask", "noise_sigma", "seed"])
    out_dir = _out_dir(settings, args)
    payload = {
        "image_b64": _read_grid_b64(_require(settings, "image", "--image")),
        "mask_b64": _read_grid_b64(_require(settings, "mask", "--mask")),
        "noise_sigma": settings["noise_sigma"],
        "seed": settings["seed"],
    }
    result = client.post("/acquire", payload)
    _write_grid_b64(out_dir / "kspace.grid", result["kspace_b64"])
    settings["out"] = str(out_dir)
    write_config_copy(out_dir, "acquire", settings)
    print(f"acquire: noise_sigma={settings['noise_sigma']} -> {out_dir}")
    return 0


def cmd_recon(args, client: ServiceClient) -> int:
    flag_keys = ["kspace", "mask", "ref", "gt", "stages", "no_align", "no_ref", "seed"]
    settings = resolve_settings(args, flag_keys)
    out_dir = _out_dir(settings, args)
    payload = {
        "kspace_b64": _read_grid_b64(_require(settings, "kspace", "--kspace")),
        "mask_b64": _read_grid_b64(_require(settings, "mask", "--mask")),
        "solver": _solver_payload(settings),
        "no_align": settings["no_align"],
        "no_ref": settings["no_ref"],
    }
    if settings.get("ref"):
        payload["reference_b64"] = _read_grid_b64(settings["ref"])
    if settings.get("gt"):
        payload["ground_truth_b64"] = _read_grid_b64(settings["gt"])
    result = client.post("/recon", payload)
    _write_grid_b64(out_dir / "recon.grid", result["image_b64"])
    _write_grid_b64(out_dir / "field.grid", result["field_b64"])
    recon_img = _decode_b64(result["image_b64"])
    export_png(recon_img, out_dir / "recon.png")
    _trace_csv(result["trace"], out_dir / "trace.csv")
    if settings.get("gt"):
        truth = grid_from_bytes(Path(settings["gt"]).read_bytes())
        error_map = recon_img.magnitude() - truth.magnitude()
        export_png(error_map, out_dir / "error_map.png", colormap="signed")
        metrics = result["metrics"]
        write_metrics_csv(
            [("recon", MetricReport(metrics["psnr"], metrics["ssim"], metrics["mae"]))],
            out_dir / "metrics.csv",
        )
        print(
            f"recon: psnr={metrics['psnr']:.2f} dB ssim={metrics['ssim']:.4f} "
            f"mae={metrics['mae']:.6f} -> {out_dir}"
        )
    else:
        print(f"recon: done -> {out_dir}")
    settings["out"] = str(out_dir)
    write_config_copy(out_dir, "recon", settings)
    return 0


def cmd_eval(args, client: ServiceClient) -> int:
    settings = resolve_settings(args, ["image", "truth", "data_range", "label"])
    out_dir = _out_dir(settings, args)
    payload = {
        "image_b64": _read_grid_b64(_require(settings, "image", "--image")),
        "truth_b64": _read_grid_b64(_require(settings, "truth", "--truth")),
    }
    if settings.get("data_range") is not None:
        payload["data_range"] = settings["data_range"]
    result = client.post("/eval", payload)
    write_metrics_csv(
        [(settings["label"], MetricReport(result["psnr"], result["ssim"], result["mae"]))],
        out_dir / "metrics.csv",
    )
    settings["out"] = str(out_dir)
    write_config_copy(out_dir, "eval", settings)
    print(
        f"eval[{settings['label']}]: psnr={result['psnr']:.6f} ssim={result['ssim']:.6f} "
        f"mae={result['mae']:.6f} -> {out_dir}"
    )
    return 0


def cmd_sweep(args, client: ServiceClient) -> int:
    flag_keys = [
        "axis", "values", "modes", "seeds", "seed", "size", "acceleration",
        "pattern", "center_alloc", "noise_sigma", "sigma", "stages", "no_align", "no_ref",
    ]
    settings = resolve_settings(args, flag_keys)
    out_dir = _out_dir(settings, args)
    try:
        values = [float(v) for v in str(settings["values"]).split(",") if v.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"bad --values list: {exc}") from exc
    modes = [m.strip() for m in str(settings["modes"]).split(",") if m.strip()]
    if settings["no_align"]:
        modes = [m for m in modes if m != "multi_align"]
    if settings["no_ref"]:
        modes = [m for m in modes if m in ("single", "zero_filled")]
    if not modes:
        raise UsageError("mode list is empty after applying --no-align/--no-ref")
    payload = {
        "axis": settings["axis"],
        "values": values,
        "modes": modes,
        "seeds": settings["seeds"],
        "base_seed": settings["seed"],
        "size": settings["size"],
        "acceleration": settings["acceleration"],
        "pattern": settings["pattern"],
        "center_alloc": settings["center_alloc"],
        "noise_sigma": settings["noise_sigma"],
        "misalign_sigma": settings["sigma"],
        "solver": _solver_payload(settings),
    }
    result = client.post("/sweep", payload)
    _sweep_rows_csv(result["rows"], out_dir / "sweep_rows.csv")
    _sweep_summary_csv(result["summary"], out_dir / "sweep_summary.csv")
    settings["out"] = str(out_dir)
    write_config_copy(out_dir, "sweep", settings)
    print(
        f"sweep[{settings['axis']}]: {len(result['rows'])} cells "
        f"({len(result['summary'])} summary rows) -> {out_dir}"
    )
    return 0


def cmd_serve(args, client: ServiceClient) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="mmrecon", description="Multi-modal CS-MRI reconstruction harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--server", help="service URL (default: in-process)")

    p = sub.add_parser("mask", help="generate a sampling mask")
    common(p)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--accel", dest="acceleration", type=float, choices=[4.0, 8.0])
    p.add_argument("--pattern", choices=["equispaced", "random"])
    p.add_argument("--center-alloc", dest="center_alloc", type=float)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("phantom", help="generate a two-contrast phantom pair")
    common(p)
    p.add_argument("--size", type=int)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("misalign", help="apply simulated misalignment to a reference")
    common(p)
    p.add_argument("--ref", help="reference grid file")
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=cmd_misalign)

    p = sub.add_parser("acquire", help="simulate undersampled noisy acquisition")
    common(p)
    p.add_argument("--image", help="ground-truth grid file")
    p.add_argument("--mask", help="mask grid file")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("recon", help="run the joint alignment-reconstruction solver")
    common(p)
    p.add_argument("--kspace", help="acquired k-space grid file")
    p.add_argument("--mask", help="mask grid file")
    p.add_argument("--ref", help="reference grid file")
    p.add_argument("--gt", help="ground-truth grid file (enables metrics + error map)")
    p.add_argument("--stages", type=int)
    p.add_argument("--no-align", dest="no_align", action="store_const", const=True)
    p.add_argument("--no-ref", dest="no_ref", action="store_const", const=True)
    p.set_defaults(func=cmd_recon)

    p = sub.add_parser("eval", help="score an image against a reference image")
    common(p)
    p.add_argument("--image", help="image grid file")
    p.add_argument("--truth", help="ground-truth grid file")
    p.add_argument("--data-range", dest="data_range", type=float)
    p.add_argument("--label")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep misalignment scale or stage count")
    common(p)
    p.add_argument("--axis", choices=["sigma", "stages"])
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--modes", help="comma-separated mode list")
    p.add_argument("--seeds", type=int, help="number of seeds per cell")
    p.add_argument("--size", type=int)
    p.add_argument("--accel", dest="acceleration", type=float, choices=[4.0, 8.0])
    p.add_argument("--pattern", choices=["equispaced", "random"])
    p.add_argument("--center-alloc", dest="center_alloc", type=float)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--sigma", type=float, help="fixed misalignment for stage sweeps")
    p.add_argument("--stages", type=int)
    p.add_argument("--no-align", dest="no_align", action="store_const", const=True)
    p.add_argument("--no-ref", dest="no_ref", action="store_const", const=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    client = None
    try:
        args = parser.parse_args(argv)
        if args.command == "serve":
            return cmd_serve(args, None)
        client = ServiceClient(getattr(args, "server", None))
        return args.func(args, client)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (MmreconError, httpx.HTTPError, RuntimeError, OSError) as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    finally:
        if client is not None:
            client.close()


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
