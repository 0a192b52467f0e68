"""Request/response models for the reconstruction service.

Grids travel as base64-encoded GridFile payloads (the same byte layout as
the on-disk format), so client-side files and service responses stay
bit-identical.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Pattern = Literal["equispaced", "random"]
Mode = Literal["multi_align", "multi_noalign", "single", "zero_filled"]


class SolverParams(BaseModel):
    stages: int = 12
    alpha: float = 1.0
    lam: float = 0.01
    eta: float = 0.005
    beta1: float = 1.0
    beta2: float = 1.0
    prox_inner: int = 30
    align_substeps: int = 1
    align_warmup_stages: int = 0
    align_min_decrease: float = 0.01
    smooth_sigma: float = 1.0
    align_schedule: Optional[list[tuple[float, float]]] = None
    eps: Optional[float] = None
    delta: Optional[float] = None


class MaskRequest(BaseModel):
    width: int
    height: int
    acceleration: float = 4.0
    center_alloc: float = 0.32
    pattern: Pattern = "equispaced"
    seed: int = 0


class MaskResponse(BaseModel):
    mask_b64: str
    total_columns: int
    low_frequency_columns: int


class PhantomRequest(BaseModel):
    size: int = 128
    seed: int = 0


class PhantomResponse(BaseModel):
    target_b64: str
    reference_b64: str


class MisalignRequest(BaseModel):
    reference_b64: str
    sigma: float = Field(ge=0.0)
    seed: int = 0


class MisalignResponse(BaseModel):
    warped_b64: str
    field_b64: str


class AcquireRequest(BaseModel):
    image_b64: str
    mask_b64: str
    noise_sigma: float = Field(default=0.0, ge=0.0)
    seed: int = 0


class AcquireResponse(BaseModel):
    kspace_b64: str


class TraceEntry(BaseModel):
    stage: int
    data_fidelity: float
    psi: float
    tv: float
    psnr: Optional[float]
    alpha_used: float


class MetricValues(BaseModel):
    psnr: float
    ssim: float
    mae: float


class ReconRequest(BaseModel):
    kspace_b64: str
    mask_b64: str
    reference_b64: Optional[str] = None
    ground_truth_b64: Optional[str] = None
    solver: SolverParams = SolverParams()
    no_align: bool = False
    no_ref: bool = False


class ReconResponse(BaseModel):
    image_b64: str
    field_b64: str
    trace: list[TraceEntry]
    metrics: Optional[MetricValues]


class EvalRequest(BaseModel):
    image_b64: str
    truth_b64: str
    data_range: Optional[float] = None


class SweepRequest(BaseModel):
    axis: Literal["sigma", "stages"]
    values: list[float]
    modes: list[Mode] = ["multi_align", "multi_noalign", "single", "zero_filled"]
    seeds: int = Field(default=10, ge=1)
    base_seed: int = 0
    size: int = 128
    acceleration: float = 4.0
    pattern: Pattern = "equispaced"
    center_alloc: float = 0.32
    noise_sigma: float = 0.01
    misalign_sigma: float = 0.0
    solver: SolverParams = SolverParams()


class SweepRow(BaseModel):
    axis: str
    value: float
    mode: str
    seed: int
    psnr: float
    ssim: float
    mae: float


class SweepSummaryRow(BaseModel):
    axis: str
    value: float
    mode: str
    n_seeds: int
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float
    mae_mean: float
    mae_std: float


class SweepResponse(BaseModel):
    rows: list[SweepRow]
    summary: list[SweepSummaryRow]
