import math

import numpy as np
import pytest
import torch

from rangeloc.descriptor import (MarginConfig, PlaceDescriptorNet,
                                 VladCodebook, describe, domain_loss,
                                 l2_normalize, load_descriptors,
                                 save_descriptors, view_loss, vlad_aggregate)
from rangeloc.geometry import Pose, Trajectory

from test_transfer import finite_difference_check


@pytest.fixture(scope="module")
def net():
    torch.manual_seed(0)
    return PlaceDescriptorNet(seed=3)


def random_tuple(seed, n_rot=3, n_pos=4, n_neg=6, dim=16):
    rng = np.random.default_rng(seed)
    mk = lambda n: torch.tensor(rng.normal(size=(n, dim)))
    return mk(1)[0], mk(n_rot), mk(n_pos), mk(n_neg)


def loop_hardest(anchor, rotated, positives, negatives, lam_a, lam_r):
    """Exhaustive-loop oracle for the hinged hardest-pair losses."""
    a = anchor.numpy()
    best1 = -np.inf
    for p in positives.numpy():
        for q in negatives.numpy():
            val = lam_a + np.linalg.norm(a - p) - np.linalg.norm(a - q)
            best1 = max(best1, max(0.0, val))
    best2 = -np.inf
    for r in rotated.numpy():
        for p in positives.numpy():
            for q in negatives.numpy():
                val = lam_r + np.linalg.norm(r - p) - np.linalg.norm(r - q)
                best2 = max(best2, max(0.0, val))
    return best1 + best2


class TestBackbone:
    def test_field_shape_and_determinism(self, net):
        y = torch.rand(2, 64, 64)
        f1 = net.backbone(y)
        f2 = net.backbone(y)
        assert f1.shape == (2, 1024, 32)
        assert torch.equal(f1, f2)

    def test_constant_input_uniform_field(self, net):
        f = net.backbone(torch.zeros(1, 64, 64))
        assert float((f - f.mean(dim=1, keepdim=True)).abs().max()) == 0.0

    def test_column_shift_covariance(self, net):
        y = torch.rand(2, 64, 64)
        base = net.backbone(y).reshape(2, 16, 64, 32)
        for k in (1, 5, 32):
            shifted = net.backbone(torch.roll(y, k, dims=2)).reshape(2, 16, 64, 32)
            err = (shifted - torch.roll(base, k, dims=2)).abs().max()
            assert float(err) <= 1e-3

    def test_input_shape_rejected(self, net):
        with pytest.raises(ValueError):
            net.backbone(torch.rand(1, 32, 32))


class TestVlad:
    def test_zero_residuals_for_single_matching_center(self):
        torch.manual_seed(1)
        cb = VladCodebook(n_clusters=1, dim=4).double()
        with torch.no_grad():
            cb.centers.copy_(torch.full((1, 4), 0.7, dtype=torch.float64))
        field = torch.full((1, 10, 4), 0.7, dtype=torch.float64)
        out = vlad_aggregate(field, cb)
        assert float(out.abs().max()) <= 1e-12

    def test_cell_permutation_invariance_exact(self):
        torch.manual_seed(2)
        cb = VladCodebook(n_clusters=5, dim=8).double()
        field = torch.rand(1, 50, 8, dtype=torch.float64)
        perm = torch.randperm(50)
        a = vlad_aggregate(field, cb)
        b = vlad_aggregate(field[:, perm], cb)
        assert float((a - b).abs().max()) <= 1e-9

    def test_hand_set_three_cell_oracle(self):
        cb = VladCodebook(n_clusters=2, dim=2).double()
        with torch.no_grad():
            cb.centers.copy_(torch.tensor([[0.0, 0.0], [1.0, 1.0]], dtype=torch.float64))
            cb.assign_weight.copy_(
                torch.tensor([[2.0, 0.0], [0.0, 2.0]], dtype=torch.float64))
            cb.assign_bias.copy_(torch.tensor([0.1, -0.1], dtype=torch.float64))
        field = torch.tensor([[[0.5, 0.2], [1.2, 0.8], [-0.3, 0.4]]],
                             dtype=torch.float64)
        out = vlad_aggregate(field, cb).detach().numpy().reshape(2, 2)
        expect = np.zeros((2, 2))
        centers = np.array([[0.0, 0.0], [1.0, 1.0]])
        for cell in field[0].numpy():
            scores = np.array([2 * cell[0] + 0.1, 2 * cell[1] - 0.1])
            e = np.exp(scores - scores.max())
            a = e / e.sum()
            for k in range(2):
                expect[k] += a[k] * (cell - centers[k])
        assert np.abs(out - expect).max() <= 1e-9

    def test_dimension_mismatch_rejected(self):
        cb = VladCodebook(n_clusters=2, dim=4)
        with pytest.raises(ValueError, match="dim"):
            vlad_aggregate(torch.rand(1, 5, 3), cb)


class TestDescribe:
    def test_unit_norm(self, net):
        d = describe(torch.rand(3, 64, 64), net)
        assert d.shape == (3, 256)
        assert np.abs(d.norm(dim=1).numpy() - 1.0).max() <= 1e-6

    def test_zero_norm_guard(self):
        v = torch.zeros(2, 8)
        v[1, 0] = 3.0
        out = l2_normalize(v)
        assert torch.all(out[0] == 0)
        assert float(out[1].norm()) == pytest.approx(1.0, abs=1e-7)

    def test_yaw_shift_invariance_all_grid_angles(self, net):
        # holds for arbitrary (untrained) parameters, including odd shifts
        y = torch.rand(1, 64, 64)
        base = describe(y, net)
        for k in (1, 2, 7, 13, 33, 63):
            shifted = describe(torch.roll(y, k, dims=2), net)
            assert float((shifted - base).norm()) <= 1e-3

    def test_single_image_convenience(self, net):
        y = np.random.default_rng(0).random((64, 64))
        d = describe(y, net)
        assert d.shape == (256,)


class TestViewLoss:
    def setup_method(self):
        self.margins = MarginConfig()

    def test_inactive_hinges_give_zero(self):
        dim = 8
        anchor = torch.zeros(dim, dtype=torch.float64)
        rot = torch.zeros(2, dim, dtype=torch.float64)
        pos = torch.zeros(3, dim, dtype=torch.float64)
        pos[:, 0] = 0.1
        neg = torch.zeros(3, dim, dtype=torch.float64)
        neg[:, 0] = 2.0
        assert float(view_loss(anchor, rot, pos, neg, self.margins)) == 0.0

    def test_printed_arithmetic_example(self):
        # single positive at 0.8, single negative at 1.0, rotations = anchor:
        # (0.5 + 0.8 - 1.0)_+ + (1.0 + 0.8 - 1.0)_+ = 0.3 + 0.8 = 1.1
        dim = 4
        anchor = torch.zeros(dim, dtype=torch.float64)
        pos = torch.zeros(1, dim, dtype=torch.float64)
        pos[0, 0] = 0.8
        neg = torch.zeros(1, dim, dtype=torch.float64)
        neg[0, 1] = 1.0
        got = view_loss(anchor, anchor[None], pos, neg, self.margins)
        assert float(got) == pytest.approx(1.1, abs=1e-12)

    def test_matches_exhaustive_oracle(self):
        for seed in range(200):
            a, r, p, q = random_tuple(seed)
            got = float(view_loss(a, r, p, q, self.margins))
            ref = loop_hardest(a, r, p, q, self.margins.lam2, self.margins.lam3)
            assert got == pytest.approx(ref, abs=1e-9)

    def test_empty_sets_rejected(self):
        a, r, p, q = random_tuple(0)
        with pytest.raises(ValueError):
            view_loss(a, r, torch.zeros(0, 16), q, self.margins)
        with pytest.raises(ValueError):
            view_loss(a, r, p, torch.zeros(0, 16), self.margins)

    def test_nonnegative(self):
        for seed in range(50):
            a, r, p, q = random_tuple(seed + 1000)
            assert float(view_loss(a, r, p, q, self.margins)) >= 0.0

    def test_gradient_check_away_from_kinks(self):
        a, r, p, q = random_tuple(7)
        loss = lambda *ts: view_loss(ts[0], ts[1], ts[2], ts[3], self.margins)
        finite_difference_check(loss, [a, r, p, q], n_params=10)


class TestDomainLoss:
    def setup_method(self):
        self.margins = MarginConfig()

    def test_identical_cross_domain_positives_far_negatives(self):
        dim = 8
        anchor = torch.zeros(dim, dtype=torch.float64)
        pos = torch.zeros(2, dim, dtype=torch.float64)  # identical to anchor
        neg = torch.zeros(2, dim, dtype=torch.float64)
        neg[:, 0] = 3.0
        got = domain_loss(anchor, anchor[None], pos, neg, self.margins)
        assert float(got) == 0.0

    def test_mirror_arithmetic_example(self):
        dim = 4
        anchor = torch.zeros(dim, dtype=torch.float64)
        pos = torch.zeros(1, dim, dtype=torch.float64)
        pos[0, 0] = 0.8
        neg = torch.zeros(1, dim, dtype=torch.float64)
        neg[0, 1] = 1.0
        got = domain_loss(anchor, anchor[None], pos, neg, self.margins)
        assert float(got) == pytest.approx(1.1, abs=1e-12)

    def test_matches_exhaustive_oracle(self):
        for seed in range(200):
            a, r, p, q = random_tuple(seed + 5000)
            got = float(domain_loss(a, r, p, q, self.margins))
            ref = loop_hardest(a, r, p, q, self.margins.lam4, self.margins.lam5)
            assert got == pytest.approx(ref, abs=1e-9)

    def test_gradient_check_away_from_kinks(self):
        a, r, p, q = random_tuple(8)
        loss = lambda *ts: domain_loss(ts[0], ts[1], ts[2], ts[3], self.margins)
        finite_difference_check(loss, [a, r, p, q], n_params=10)


class TestMarginConfig:
    def test_defaults_match_contract(self):
        m = MarginConfig()
        assert (m.lam1, m.lam2, m.lam3, m.lam4, m.lam5) == (0.5, 0.5, 1.0, 0.5, 1.0)
        assert (m.d_pos, m.d_neg) == (5.0, 20.0)

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            MarginConfig(lam2=2.0, lam3=1.0)
        with pytest.raises(ValueError):
            MarginConfig(d_pos=25.0, d_neg=20.0)


class TestDescriptorFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        descs = rng.normal(size=(5, 256))
        descs /= np.linalg.norm(descs, axis=1, keepdims=True)
        poses = [Pose(rng.normal(size=3), np.array([1.0, 0, 0, 0]), timestamp=i)
                 for i in range(5)]
        path = tmp_path / "d.i3dds"
        save_descriptors(path, descs, Trajectory(poses, max_step=np.inf))
        with open(path, "rb") as f:
            assert f.read(6) == b"I3DDS1"
        back, traj = load_descriptors(path)
        assert back.shape == (5, 256)
        assert np.abs(back - descs).max() < 1e-6
        assert np.allclose(traj.positions(), np.stack([p.position for p in poses]),
                           atol=1e-6)

    def test_count_mismatch_rejected(self, tmp_path):
        poses = [Pose(np.zeros(3), np.array([1.0, 0, 0, 0]), timestamp=0)]
        with pytest.raises(ValueError, match="count"):
            save_descriptors(tmp_path / "x.i3dds", np.zeros((2, 4)),
                             Trajectory(poses, max_step=np.inf))
