import numpy as np
import pytest

from mmrecon.errors import InvalidParameterError
from mmrecon.pipeline import CellSpec, make_mask, run_cell, run_sweep, summarize_sweep
from mmrecon.solver import SolverConfig

FAST = SolverConfig(stages=2, beta1=0.1, beta2=0.1, lam=0.01, eta=0.005, prox_inner=10)


class TestCellSpec:
    def test_rejects_unknown_mode(self):
        with pytest.raises(InvalidParameterError):
            CellSpec(mode="hybrid")

    def test_rejects_unknown_pattern(self):
        with pytest.raises(InvalidParameterError):
            CellSpec(pattern="spiral")


class TestRunCell:
    def test_deterministic(self):
        spec = CellSpec(size=64, seed=3, noise_sigma=0.01, mode="multi_align", misalign_sigma=1.0)
        cfg = SolverConfig(
            stages=2, beta1=0.1, beta2=0.1, lam=0.01, eta=0.005, prox_inner=10,
            align_substeps=1, alpha=1e4, smooth_sigma=8.0,
        )
        a = run_cell(spec, cfg)
        b = run_cell(spec, cfg)
        assert a.psnr == b.psnr
        assert np.array_equal(a.image.data, b.image.data)
        assert np.array_equal(a.phi.dx, b.phi.dx)

    def test_zero_filled_mode_has_empty_trace(self):
        result = run_cell(CellSpec(size=64, seed=0, mode="zero_filled"), FAST)
        assert len(result.trace) == 0
        assert np.all(result.phi.dx == 0)

    def test_single_mode_ignores_misalignment(self):
        r1 = run_cell(CellSpec(size=64, seed=1, mode="single", misalign_sigma=0.0), FAST)
        r2 = run_cell(CellSpec(size=64, seed=1, mode="single", misalign_sigma=2.0), FAST)
        assert np.array_equal(r1.image.data, r2.image.data)

    def test_true_field_zero_at_sigma_zero(self):
        result = run_cell(CellSpec(size=64, seed=2, mode="multi_noalign"), FAST)
        assert np.all(result.true_field.dx == 0)

    def test_random_pattern_uses_seeded_mask(self):
        a = make_mask(CellSpec(size=64, seed=5, pattern="random"))
        b = make_mask(CellSpec(size=64, seed=5, pattern="random"))
        c = make_mask(CellSpec(size=64, seed=6, pattern="random"))
        assert np.array_equal(a.columns, b.columns)
        assert not np.array_equal(a.columns, c.columns)


class TestSweep:
    def test_row_count_and_grouping(self):
        rows = run_sweep(
            axis="stages",
            values=[0, 1],
            modes=["zero_filled", "single"],
            n_seeds=2,
            base_seed=0,
            cell=CellSpec(size=64, noise_sigma=0.01),
            solver=FAST,
        )
        assert len(rows) == 2 * 2 * 2
        summary = summarize_sweep(rows)
        assert len(summary) == 4
        for s in summary:
            assert s.n_seeds == 2

    def test_summary_math(self):
        rows = run_sweep(
            axis="stages",
            values=[1],
            modes=["zero_filled"],
            n_seeds=3,
            base_seed=0,
            cell=CellSpec(size=64, noise_sigma=0.01),
            solver=FAST,
        )
        summary = summarize_sweep(rows)[0]
        psnrs = [r.psnr for r in rows]
        assert summary.psnr_mean == pytest.approx(np.mean(psnrs))
        assert summary.psnr_std == pytest.approx(np.std(psnrs))

    def test_rejects_unknown_axis(self):
        with pytest.raises(InvalidParameterError):
            run_sweep("noise", [0], ["single"], 1, 0, CellSpec(size=64), FAST)
