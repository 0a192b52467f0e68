"""End-to-end experiment cells: phantom -> misalign -> acquire -> reconstruct -> score.

One cell is a single seeded run in one of four modes:

    multi_align    full pipeline (reference coupling + alignment steps)
    multi_noalign  reference coupling with the field frozen at zero
    single         no reference (lam = 0, no alignment)
    zero_filled    no reconstruction stages at all

Seed derivation is fixed so cells are reproducible and independent:
phantom uses the cell seed, the misalignment draw uses seed + 1000, noise
uses the cell seed, and random masks use seed + 2000.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidParameterError
from .grids import ComplexImage, DisplacementField, SamplingMask
from .metrics import evaluate
from .sampling import MaskSpec, equispaced_mask, random_mask
from .simulate import MisalignSpec, acquire, misalign, phantom_pair
from .solver import SolverConfig, SolverTrace, reconstruct, zero_filled

MISALIGN_SEED_OFFSET = 1000
MASK_SEED_OFFSET = 2000

MODES = ("multi_align", "multi_noalign", "single", "zero_filled")


@dataclass(frozen=True)
class CellSpec:
    """Everything needed to reproduce one experiment cell."""

    size: int = 128
    seed: int = 0
    acceleration: float = 4.0
    pattern: str = "equispaced"
    center_alloc: float = 0.32
    noise_sigma: float = 0.01
    misalign_sigma: float = 0.0
    mode: str = "multi_align"

    def __post_init__(self) -> None:
        if self.pattern not in ("equispaced", "random"):
            raise InvalidParameterError(f"unknown pattern {self.pattern!r}")
        if self.mode not in MODES:
            raise InvalidParameterError(f"unknown mode {self.mode!r}; expected one of {MODES}")


@dataclass(frozen=True)
class CellResult:
    psnr: float
    ssim: float
    mae: float
    image: ComplexImage
    phi: DisplacementField
    true_field: DisplacementField
    trace: SolverTrace


def make_mask(spec: CellSpec) -> SamplingMask:
    mask_spec = MaskSpec(
        width=spec.size,
        acceleration=spec.acceleration,
        center_alloc=spec.center_alloc,
        seed=spec.seed + MASK_SEED_OFFSET,
    )
    if spec.pattern == "random":
        return random_mask(mask_spec, height=spec.size)
    return equispaced_mask(mask_spec, height=spec.size)


def run_cell(spec: CellSpec, solver: SolverConfig) -> CellResult:
    """Run one seeded cell and score it against the phantom ground truth."""
    pair = phantom_pair(spec.size, spec.seed)
    mask = make_mask(spec)
    ref, true_field = misalign(
        pair.reference,
        MisalignSpec(sigma=spec.misalign_sigma, size=spec.size, seed=spec.seed + MISALIGN_SEED_OFFSET),
    )
    k = acquire(pair.target, mask, spec.noise_sigma, seed=spec.seed)

    no_align = replace(solver, align_substeps=0, align_schedule=None)
    if spec.mode == "zero_filled":
        x = zero_filled(k, mask)
        phi = DisplacementField.zeros(x.shape)
        trace = SolverTrace(())
    elif spec.mode == "single":
        x, phi, trace = reconstruct(k, mask, None, no_align)
    elif spec.mode == "multi_noalign":
        x, phi, trace = reconstruct(k, mask, ref, no_align)
    else:
        x, phi, trace = reconstruct(k, mask, ref, solver)

    gt = pair.target.magnitude()
    report = evaluate(x.magnitude(), gt, float(gt.max()))
    return CellResult(
        psnr=report.psnr,
        ssim=report.ssim,
        mae=report.mae,
        image=x,
        phi=phi,
        true_field=true_field,
        trace=trace,
    )


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    mode: str
    seed: int
    psnr: float
    ssim: float
    mae: float


def run_sweep(
    axis: str,
    values: Sequence[float],
    modes: Sequence[str],
    n_seeds: int,
    base_seed: int,
    cell: CellSpec,
    solver: SolverConfig,
) -> list[SweepRow]:
    """Sweep misalignment scale or stage count across modes and seeds.

    axis = "sigma" varies the misalignment scale; axis = "stages" varies
    the stage count at the cell's fixed misalignment. Returns tidy
    long-format rows (one per value x mode x seed).
    """
    if axis not in ("sigma", "stages"):
        raise InvalidParameterError(f"unknown sweep axis {axis!r}; use 'sigma' or 'stages'")
    for mode in modes:
        if mode not in MODES:
            raise InvalidParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    rows = []
    for value in values:
        for mode in modes:
            for s in range(n_seeds):
                seed = base_seed + s
                if axis == "sigma":
                    spec = replace(cell, seed=seed, misalign_sigma=float(value), mode=mode)
                    cfg = solver
                else:
                    spec = replace(cell, seed=seed, mode=mode)
                    cfg = replace(solver, stages=int(value))
                result = run_cell(spec, cfg)
                rows.append(
                    SweepRow(
                        axis=axis,
                        value=float(value),
                        mode=mode,
                        seed=seed,
                        psnr=result.psnr,
                        ssim=result.ssim,
                        mae=result.mae,
                    )
                )
    return rows


@dataclass(frozen=True)
class SweepSummary:
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


def summarize_sweep(rows: Sequence[SweepRow]) -> list[SweepSummary]:
    """Aggregate tidy rows to mean +/- std per (value, mode) cell."""
    cells: dict[tuple[float, str], list[SweepRow]] = {}
    for row in rows:
        cells.setdefault((row.value, row.mode), []).append(row)
    out = []
    for (value, mode), group in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        psnrs = np.array([r.psnr for r in group])
        ssims = np.array([r.ssim for r in group])
        maes = np.array([r.mae for r in group])
        out.append(
            SweepSummary(
                axis=group[0].axis,
                value=value,
                mode=mode,
                n_seeds=len(group),
                psnr_mean=float(psnrs.mean()),
                psnr_std=float(psnrs.std()),
                ssim_mean=float(ssims.mean()),
                ssim_std=float(ssims.std()),
                mae_mean=float(maes.mean()),
                mae_std=float(maes.std()),
            )
        )
    return out
