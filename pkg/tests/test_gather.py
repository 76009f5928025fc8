import numpy as np
import pytest
import torch

from xscene.triplane.gather import (
    GatherDiagnostics,
    bilinear_sample,
    deformable_gather,
    fourier_features,
    gather_features,
)
from xscene.triplane.types import PLANE_NAMES, DeformAttnParams, Triplane

from .oracles import scalar_bilinear, scalar_fourier_features, scalar_gather


def constant_triplane(values=(1.0, 2.0, 3.0), size=5, channels=2):
    return Triplane(
        h_xy=np.full((size, size, channels), values[0], dtype=np.float32),
        h_xz=np.full((size, size, channels), values[1], dtype=np.float32),
        h_yz=np.full((size, size, channels), values[2], dtype=np.float32),
    )


def random_params(rng, k=3, dim=8, bands=4, offset_scale=0.05):
    return DeformAttnParams.random(k, dim, bands, rng, offset_scale=offset_scale)


class TestFourierFeatures:
    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(0)
        q = rng.uniform(0, 1, (10, 3))
        feats = fourier_features(torch.from_numpy(q), dim=20, bands=4).numpy()
        for i in range(10):
            expected = scalar_fourier_features(list(q[i]), 20, 4)
            np.testing.assert_allclose(feats[i], expected, atol=1e-12)

    def test_dim_exceeding_bands_rejected(self):
        with pytest.raises(ValueError):
            fourier_features(torch.zeros(1, 3, dtype=torch.float64), dim=30, bands=2)


class TestBilinear:
    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(1)
        plane = rng.normal(size=(4, 6, 3))
        pts = rng.uniform(-0.2, 1.2, (50, 2))  # include out-of-range for clamping
        sampled = bilinear_sample(torch.from_numpy(plane), torch.from_numpy(pts)).numpy()
        for i in range(50):
            expected = scalar_bilinear(plane.tolist(), pts[i, 0], pts[i, 1])
            np.testing.assert_allclose(sampled[i], expected, atol=1e-12)

    def test_exact_at_grid_nodes(self):
        plane = torch.arange(12, dtype=torch.float64).reshape(3, 4, 1)
        pos = torch.tensor([[0.0, 0.0], [1.0, 1.0], [0.5, 1.0 / 3.0]], dtype=torch.float64)
        out = bilinear_sample(plane, pos).squeeze(-1)
        assert out[0] == pytest.approx(0.0)
        assert out[1] == pytest.approx(11.0)
        assert out[2] == pytest.approx(plane[1, 1, 0].item())


class TestDeformableGather:
    def test_constant_planes_sum_for_any_weights(self):
        h = constant_triplane()
        rng = np.random.default_rng(2)
        for _ in range(5):
            params = random_params(rng, offset_scale=0.5)
            queries = rng.uniform(0, 1, (20, 3))
            out = deformable_gather(h, params, queries)
            np.testing.assert_allclose(out, 6.0, atol=1e-12)

    def test_zero_offsets_single_point_reduces_to_projection_sum(self):
        rng = np.random.default_rng(3)
        size, channels = 6, 2
        h = Triplane(
            h_xy=rng.normal(size=(size, size, channels)).astype(np.float32),
            h_xz=rng.normal(size=(size, size, channels)).astype(np.float32),
            h_yz=rng.normal(size=(size, size, channels)).astype(np.float32),
        )
        params = DeformAttnParams(
            k_points=1,
            pe_dim=8,
            pe_bands=4,
            w_weight={p: rng.normal(size=(1, 8)) for p in PLANE_NAMES},
            w_offset={p: np.zeros((1, 2, 8)) for p in PLANE_NAMES},
        )
        queries = rng.uniform(0, 1, (15, 3))
        out = deformable_gather(h, params, queries)
        for i, q in enumerate(queries):
            expected = np.zeros(channels)
            for name, (a0, a1) in (("xy", (0, 1)), ("xz", (0, 2)), ("yz", (1, 2))):
                expected += scalar_bilinear(
                    h.plane(name).astype(np.float64).tolist(), q[a0], q[a1]
                )
            np.testing.assert_allclose(out[i], expected, atol=1e-10)

    def test_out_of_cube_queries_clamped_and_counted(self):
        h = constant_triplane()
        rng = np.random.default_rng(4)
        params = random_params(rng)
        diag = GatherDiagnostics()
        queries = np.array([[0.5, 0.5, 0.5], [1.5, 0.5, 0.5], [-0.1, 2.0, 0.5]])
        out = deformable_gather(h, params, queries, diagnostics=diag)
        assert diag.out_of_range_queries == 2
        np.testing.assert_allclose(out, 6.0, atol=1e-12)

    def test_acceptance_thousand_random_cases_match_scalar_oracle(self):
        rng = np.random.default_rng(2024)
        mismatches = 0
        for case in range(1000):
            size_a = int(rng.integers(3, 6))
            size_b = int(rng.integers(3, 6))
            channels = int(rng.integers(1, 4))
            k = int(rng.integers(1, 4))
            h = Triplane(
                h_xy=rng.normal(size=(size_a, size_b, channels)).astype(np.float32),
                h_xz=rng.normal(size=(size_a, size_b, channels)).astype(np.float32),
                h_yz=rng.normal(size=(size_b, size_b, channels)).astype(np.float32),
            )
            params = random_params(rng, k=k, dim=8, bands=4, offset_scale=0.1)
            query = rng.uniform(-0.1, 1.1, 3)
            got = deformable_gather(h, params, query[None])[0]
            planes64 = {
                name: h.plane(name).astype(np.float64).tolist() for name in PLANE_NAMES
            }
            expected = scalar_gather(
                planes64,
                {p: params.w_weight[p].tolist() for p in PLANE_NAMES},
                {p: params.w_offset[p].tolist() for p in PLANE_NAMES},
                list(query),
                8,
                4,
            )
            if not np.allclose(got, expected, atol=1e-10, rtol=0):
                mismatches += 1
        assert mismatches == 0


def _nudge_off_knots(planes, w_weight, w_offset, queries, pe_dim, pe_bands, margin=1e-3):
    """Verify all sampling positions stay off bilinear cell knots and borders."""
    pe = fourier_features(queries, pe_dim, pe_bands)
    for name in PLANE_NAMES:
        plane = planes[name]
        a, b, _ = plane.shape
        axes = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}[name]
        base = queries[:, list(axes)]
        offsets = torch.einsum("qd,ksd->qks", pe, torch.as_tensor(w_offset[name]))
        pos = base.unsqueeze(1) + offsets
        u = pos[..., 0] * (a - 1)
        v = pos[..., 1] * (b - 1)
        for coord, hi in ((u, a - 1), (v, b - 1)):
            if (coord < margin).any() or (coord > hi - margin).any():
                return False
            frac = coord - coord.floor()
            if ((frac < margin) & (frac > 0)).any() or (frac > 1 - margin).any():
                return False
    return True


class TestGatherGradients:
    def test_gradients_match_central_differences(self):
        torch.manual_seed(0)
        rng = np.random.default_rng(11)
        size, channels, k, dim, bands = 5, 2, 3, 8, 4

        attempts = 0
        while True:
            attempts += 1
            assert attempts < 50, "could not find a knot-free configuration"
            planes = {
                name: torch.tensor(
                    rng.normal(size=(size, size, channels)), dtype=torch.float64
                )
                for name in PLANE_NAMES
            }
            ww = {
                name: torch.tensor(rng.normal(0, 0.5, (k, dim)), dtype=torch.float64)
                for name in PLANE_NAMES
            }
            wo = {
                name: torch.tensor(rng.normal(0, 0.01, (k, 2, dim)), dtype=torch.float64)
                for name in PLANE_NAMES
            }
            queries = torch.tensor(rng.uniform(0.2, 0.8, (6, 3)), dtype=torch.float64)
            if _nudge_off_knots(planes, ww, wo, queries, dim, bands):
                break

        for leaf in (planes["xy"], ww["xz"], wo["yz"]):
            leaf.requires_grad_(True)

        def loss_fn():
            out = gather_features(planes, ww, wo, queries, dim, bands)
            return (out * out).sum()

        loss = loss_fn()
        loss.backward()

        h_step = 1e-5
        checked = 0
        for leaf in (planes["xy"], ww["xz"], wo["yz"]):
            flat = leaf.detach().reshape(-1)
            grad = leaf.grad.reshape(-1)
            idxs = rng.choice(len(flat), size=5, replace=False)
            for idx in idxs:
                original = flat[idx].item()
                with torch.no_grad():
                    flat[idx] = original + h_step
                    up = loss_fn().item()
                    flat[idx] = original - h_step
                    down = loss_fn().item()
                    flat[idx] = original
                fd = (up - down) / (2 * h_step)
                ad = grad[idx].item()
                denom = max(abs(fd), abs(ad), 1e-8)
                assert abs(fd - ad) / denom < 1e-4, (fd, ad)
                checked += 1
        assert checked == 15
