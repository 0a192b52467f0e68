import numpy as np
import pytest

from mmrecon.errors import DimensionError, InvalidParameterError
from mmrecon.grids import DisplacementField
from mmrecon.sampling import MaskSpec, equispaced_mask
from mmrecon.simulate import MisalignSpec, acquire, misalign, phantom_pair
from mmrecon.transform import forward_masked


class TestPhantomPair:
    def test_deterministic(self):
        a = phantom_pair(64, seed=5)
        b = phantom_pair(64, seed=5)
        assert np.array_equal(a.target.data, b.target.data)
        assert np.array_equal(a.reference.data, b.reference.data)

    def test_shared_geometry(self):
        pair = phantom_pair(64, seed=6)
        # both contrasts are constant per supersampled region label up to the
        # shared band-limiting blur; compare where labels are locally uniform
        t = pair.target.data.real
        r = pair.reference.data.real
        labels = pair.labels
        interior = np.zeros_like(labels, dtype=bool)
        interior[2:-2, 2:-2] = (
            (labels[2:-2, 2:-2] == labels[:-4, 2:-2])
            & (labels[2:-2, 2:-2] == labels[4:, 2:-2])
            & (labels[2:-2, 2:-2] == labels[2:-2, :-4])
            & (labels[2:-2, 2:-2] == labels[2:-2, 4:])
        )
        for lab in np.unique(labels[interior]):
            sel = interior & (labels == lab)
            if sel.sum() < 25:
                continue
            assert t[sel].std() < 0.02
            assert r[sel].std() < 0.02

    def test_contrasts_differ(self):
        for seed in range(5):
            pair = phantom_pair(64, seed=seed)
            t = pair.target.data.real.ravel()
            r = pair.reference.data.real.ravel()
            corr = np.corrcoef(t, r)[0, 1]
            assert corr < 0.999

    def test_values_in_unit_range(self):
        pair = phantom_pair(64, seed=7)
        for img in (pair.target, pair.reference):
            assert img.data.real.min() >= -1e-9
            assert img.data.real.max() <= 1.0 + 1e-9
            assert np.all(img.data.imag == 0)

    def test_rejects_small_size(self):
        with pytest.raises(DimensionError):
            phantom_pair(32, seed=0)

    def test_ellipse_count_in_band(self):
        for seed in range(10):
            pair = phantom_pair(64, seed=seed)
            n_regions = len(np.unique(pair.labels))
            # background + disc + 8..15 ellipses (some may be overdrawn)
            assert 3 <= n_regions <= 17


class TestAcquire:
    def setup_method(self):
        self.pair = phantom_pair(64, seed=0)
        self.mask = equispaced_mask(MaskSpec(width=64, acceleration=4), height=64)

    def test_noiseless_is_masked_fft(self):
        k = acquire(self.pair.target, self.mask, noise_sigma=0.0)
        expected = forward_masked(self.pair.target, self.mask)
        assert np.array_equal(k.data, expected.data)

    def test_unsampled_bins_exactly_zero(self):
        k = acquire(self.pair.target, self.mask, noise_sigma=0.05, seed=1)
        assert np.all(k.data[~self.mask.as_array()] == 0)

    def test_noise_statistics(self):
        # >= 10^4 sampled bins: 256x256 at 4x keeps 64 columns
        pair = phantom_pair(256, seed=1)
        mask = equispaced_mask(MaskSpec(width=256, acceleration=4), height=256)
        k = acquire(pair.target, mask, noise_sigma=0.02, seed=3)
        clean = forward_masked(pair.target, mask)
        delta = (k.data - clean.data)[mask.as_array()]
        assert delta.size >= 10_000
        assert np.std(delta.real) == pytest.approx(0.02, rel=0.05)
        assert np.std(delta.imag) == pytest.approx(0.02, rel=0.05)

    def test_deterministic(self):
        a = acquire(self.pair.target, self.mask, noise_sigma=0.05, seed=9)
        b = acquire(self.pair.target, self.mask, noise_sigma=0.05, seed=9)
        assert np.array_equal(a.data, b.data)

    def test_linear_at_zero_noise(self):
        other = phantom_pair(64, seed=3).target
        ka = acquire(self.pair.target, self.mask, 0.0)
        kb = acquire(other, self.mask, 0.0)
        from mmrecon.grids import ComplexImage

        summed = acquire(ComplexImage(self.pair.target.data + other.data), self.mask, 0.0)
        assert np.max(np.abs(summed.data - ka.data - kb.data)) < 1e-10

    def test_rejects_negative_noise(self):
        with pytest.raises(InvalidParameterError):
            acquire(self.pair.target, self.mask, noise_sigma=-0.1)


class TestMisalign:
    def test_sigma_zero_is_identity(self):
        pair = phantom_pair(64, seed=0)
        warped, field = misalign(pair.reference, MisalignSpec(sigma=0.0, size=64, seed=4))
        assert np.array_equal(warped.data, pair.reference.data)
        assert np.all(field.dx == 0) and np.all(field.dy == 0)

    def test_deterministic(self):
        pair = phantom_pair(64, seed=0)
        spec = MisalignSpec(sigma=1.0, size=64, seed=11)
        w1, f1 = misalign(pair.reference, spec)
        w2, f2 = misalign(pair.reference, spec)
        assert np.array_equal(w1.data, w2.data)
        assert np.array_equal(f1.dx, f2.dx)

    def test_field_magnitude_bound(self):
        n = 64
        pair = phantom_pair(n, seed=0)
        for sigma in (0.5, 1.0, 2.0):
            bound = (0.05 * n + 0.02 * n + (n / np.sqrt(2)) * 0.01 * np.pi) * sigma
            for seed in range(100):
                _, field = misalign(pair.reference, MisalignSpec(sigma=sigma, size=n, seed=seed))
                assert max(np.abs(field.dx).max(), np.abs(field.dy).max()) <= bound + 1e-9

    def test_severity_monotone_in_sigma(self):
        pair = phantom_pair(64, seed=0)
        means = []
        for sigma in (0.0, 0.5, 1.0, 2.0):
            total = 0.0
            for seed in range(50):
                _, field = misalign(pair.reference, MisalignSpec(sigma, 64, seed))
                total += float(np.mean(np.hypot(field.dx, field.dy)))
            means.append(total / 50)
        assert all(means[i] <= means[i + 1] + 1e-12 for i in range(len(means) - 1))

    def test_rejects_size_mismatch(self):
        pair = phantom_pair(64, seed=0)
        with pytest.raises(DimensionError):
            misalign(pair.reference, MisalignSpec(sigma=1.0, size=128, seed=0))

    def test_rejects_negative_sigma(self):
        with pytest.raises(InvalidParameterError):
            MisalignSpec(sigma=-1.0, size=64, seed=0)
