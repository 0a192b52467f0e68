"""FastAPI service exposing the reconstruction pipeline.

Thin layer: decode GridFile payloads, call the core package, encode the
results. All endpoints are pure functions of their request bodies.
"""

from __future__ import annotations

import base64
import dataclasses

from fastapi import FastAPI, HTTPException

from ..errors import MmreconError, NumericalError
from ..grids import ComplexImage, KSpace, SamplingMask
from ..gridio import grid_bytes, grid_from_bytes
from ..metrics import evaluate
from ..pipeline import CellSpec, run_sweep, summarize_sweep
from ..sampling import MaskSpec, column_counts, equispaced_mask, random_mask
from ..simulate import MisalignSpec, acquire, misalign, phantom_pair
from ..solver import SolverConfig, reconstruct
from . import schemas

app = FastAPI(title="mmrecon", description="Multi-modal CS-MRI reconstruction service")


def _decode(b64: str, expect, what: str):
    try:
        obj = grid_from_bytes(base64.b64decode(b64))
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=f"{what}: {exc}") from exc
    if not isinstance(obj, expect):
        raise HTTPException(
            status_code=422,
            detail=f"{what}: expected {expect.__name__}, got {type(obj).__name__}",
        )
    return obj


def _encode(obj) -> str:
    return base64.b64encode(grid_bytes(obj)).decode("ascii")


def _solver_config(params: schemas.SolverParams) -> SolverConfig:
    try:
        return SolverConfig(**params.model_dump())
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/mask", response_model=schemas.MaskResponse)
def make_mask(req: schemas.MaskRequest) -> schemas.MaskResponse:
    try:
        spec = MaskSpec(
            width=req.width,
            acceleration=req.acceleration,
            center_alloc=req.center_alloc,
            seed=req.seed,
        )
        total, n_low = column_counts(spec)
        if req.pattern == "random":
            mask = random_mask(spec, height=req.height)
        else:
            mask = equispaced_mask(spec, height=req.height)
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.MaskResponse(
        mask_b64=_encode(mask), total_columns=total, low_frequency_columns=n_low
    )


@app.post("/phantom", response_model=schemas.PhantomResponse)
def make_phantom(req: schemas.PhantomRequest) -> schemas.PhantomResponse:
    try:
        pair = phantom_pair(req.size, req.seed)
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.PhantomResponse(
        target_b64=_encode(pair.target), reference_b64=_encode(pair.reference)
    )


@app.post("/misalign", response_model=schemas.MisalignResponse)
def make_misaligned(req: schemas.MisalignRequest) -> schemas.MisalignResponse:
    ref = _decode(req.reference_b64, ComplexImage, "reference")
    try:
        warped, field = misalign(ref, MisalignSpec(sigma=req.sigma, size=ref.height, seed=req.seed))
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.MisalignResponse(warped_b64=_encode(warped), field_b64=_encode(field))


@app.post("/acquire", response_model=schemas.AcquireResponse)
def make_acquisition(req: schemas.AcquireRequest) -> schemas.AcquireResponse:
    img = _decode(req.image_b64, ComplexImage, "image")
    mask = _decode(req.mask_b64, SamplingMask, "mask")
    try:
        k = acquire(img, mask, req.noise_sigma, seed=req.seed)
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.AcquireResponse(kspace_b64=_encode(k))


@app.post("/recon", response_model=schemas.ReconResponse)
def run_recon(req: schemas.ReconRequest) -> schemas.ReconResponse:
    ktilde = KSpace(_decode(req.kspace_b64, ComplexImage, "k-space").data)
    mask = _decode(req.mask_b64, SamplingMask, "mask")
    ref = (
        _decode(req.reference_b64, ComplexImage, "reference")
        if req.reference_b64 is not None
        else None
    )
    gt = (
        _decode(req.ground_truth_b64, ComplexImage, "ground truth")
        if req.ground_truth_b64 is not None
        else None
    )
    cfg = _solver_config(req.solver)
    if req.no_ref:
        ref = None
    if req.no_align:
        cfg = dataclasses.replace(cfg, align_substeps=0, align_schedule=None)
    try:
        x, phi, trace = reconstruct(ktilde, mask, ref, cfg, ground_truth=gt)
    except NumericalError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    metrics = None
    if gt is not None:
        gt_mag = gt.magnitude()
        report = evaluate(x.magnitude(), gt_mag, float(gt_mag.max()))
        metrics = schemas.MetricValues(psnr=report.psnr, ssim=report.ssim, mae=report.mae)
    return schemas.ReconResponse(
        image_b64=_encode(x),
        field_b64=_encode(phi),
        trace=[schemas.TraceEntry(**dataclasses.asdict(r)) for r in trace],
        metrics=metrics,
    )


@app.post("/eval", response_model=schemas.MetricValues)
def run_eval(req: schemas.EvalRequest) -> schemas.MetricValues:
    img = _decode(req.image_b64, ComplexImage, "image")
    truth = _decode(req.truth_b64, ComplexImage, "truth")
    truth_mag = truth.magnitude()
    data_range = req.data_range if req.data_range is not None else float(truth_mag.max())
    try:
        report = evaluate(img.magnitude(), truth_mag, data_range)
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return schemas.MetricValues(psnr=report.psnr, ssim=report.ssim, mae=report.mae)


@app.post("/sweep", response_model=schemas.SweepResponse)
def run_sweep_endpoint(req: schemas.SweepRequest) -> schemas.SweepResponse:
    cfg = _solver_config(req.solver)
    cell = CellSpec(
        size=req.size,
        acceleration=req.acceleration,
        pattern=req.pattern,
        center_alloc=req.center_alloc,
        noise_sigma=req.noise_sigma,
        misalign_sigma=req.misalign_sigma,
    )
    try:
        rows = run_sweep(
            axis=req.axis,
            values=req.values,
            modes=req.modes,
            n_seeds=req.seeds,
            base_seed=req.base_seed,
            cell=cell,
            solver=cfg,
        )
    except MmreconError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    summary = summarize_sweep(rows)
    return schemas.SweepResponse(
        rows=[schemas.SweepRow(**dataclasses.asdict(r)) for r in rows],
        summary=[schemas.SweepSummaryRow(**dataclasses.asdict(s)) for s in summary],
    )
