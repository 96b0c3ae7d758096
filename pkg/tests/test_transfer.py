import math

import numpy as np
import pytest
import torch

from rangeloc.transfer import (TransferNet, classifier_loss, gan_loss,
                               load_checkpoint, mutual_latent_loss, recon_loss,
                               save_checkpoint, transfer_forward, transfer_loss)


@pytest.fixture(scope="module")
def net():
    torch.manual_seed(0)
    return TransferNet(n_conditions=4).eval()


def finite_difference_check(loss_fn, tensors, n_params=10, step=1e-4, rel_tol=1e-3,
                            seed=0):
    """Central finite differences on a random subset of input entries."""
    rng = np.random.default_rng(seed)
    leaves = [t.detach().double().requires_grad_(True) for t in tensors]
    loss = loss_fn(*leaves)
    loss.backward()
    for _ in range(n_params):
        ti = rng.integers(len(leaves))
        flat = leaves[ti].detach().reshape(-1)
        pi = rng.integers(flat.numel())
        orig = flat[pi].item()
        flat[pi] = orig + step
        up = float(loss_fn(*[l.detach() for l in leaves]))
        flat[pi] = orig - step
        dn = float(loss_fn(*[l.detach() for l in leaves]))
        flat[pi] = orig
        fd = (up - dn) / (2 * step)
        grad = leaves[ti].grad
        an = 0.0 if grad is None else float(grad.reshape(-1)[pi])
        denom = max(abs(fd), abs(an), 1e-8)
        assert abs(fd - an) / denom <= rel_tol, f"tensor {ti} entry {pi}: {fd} vs {an}"


class TestForward:
    def test_output_shapes(self, net):
        x = torch.rand(2, 3, 64, 64)
        out = transfer_forward(x, net)
        assert out.latent.geometry.shape == (2, 64, 8, 8)
        assert out.latent.condition.shape == (2, 32)
        assert out.range_pred.shape == (2, 1, 64, 64)
        assert out.image_recon.shape == (2, 3, 64, 64)
        assert out.cond_logits.shape == (2, 4)

    def test_outputs_bounded(self, net):
        out = transfer_forward(torch.rand(2, 3, 64, 64), net)
        assert out.range_pred.min() >= 0 and out.range_pred.max() <= 1
        assert out.image_recon.min() >= 0 and out.image_recon.max() <= 1

    def test_eval_mode_bit_deterministic(self, net):
        x = torch.rand(1, 3, 64, 64)
        a = transfer_forward(x, net)
        b = transfer_forward(x, net)
        assert torch.equal(a.range_pred, b.range_pred)
        assert torch.equal(a.image_recon, b.image_recon)
        assert torch.equal(a.cond_logits, b.cond_logits)

    def test_accepts_hwc_numpy(self, net):
        img = np.random.default_rng(0).random((64, 64, 3))
        out = transfer_forward(img, net)
        assert out.range_pred.shape == (1, 1, 64, 64)

    def test_shape_mismatch_rejected(self, net):
        with pytest.raises(ValueError):
            transfer_forward(torch.rand(1, 3, 32, 32), net)
        with pytest.raises(ValueError):
            transfer_forward(torch.rand(1, 3, 64, 64), net, mode="predict")

    @pytest.mark.parametrize("k", [8, 16, 32])
    def test_column_shift_equivariance(self, net, k):
        # shifts aligned with the 8x stride chain are exact by construction
        x = torch.rand(1, 3, 64, 64)
        base = transfer_forward(x, net).range_pred
        shifted = transfer_forward(torch.roll(x, k, dims=3), net).range_pred
        err = (shifted - torch.roll(base, k, dims=3)).abs().mean()
        assert float(err) <= 1e-3

    def test_range_pred_independent_of_condition_latent(self, net):
        x = torch.rand(1, 3, 64, 64)
        out = transfer_forward(x, net)
        direct = net.range_decoder(out.latent.geometry)
        assert torch.equal(direct, out.range_pred)
        # decode_image DOES depend on the condition latent
        a = net.decode_image(out.geo_from_range, out.latent.condition)
        b = net.decode_image(out.geo_from_range, out.latent.condition + 1.0)
        assert not torch.equal(a, b)


class TestDiscriminator:
    def test_scores_in_unit_interval(self, net):
        y = torch.rand(5, 1, 64, 64)
        s = net.discriminator(y)
        assert s.shape == (5,)
        assert bool(((s > 0) & (s < 1)).all())

    def test_identical_parameter_copies_agree(self):
        torch.manual_seed(3)
        a = TransferNet(n_conditions=4).eval()
        b = TransferNet(n_conditions=4, seed=9).eval()
        b.load_state_dict(a.state_dict())
        y = torch.rand(2, 1, 64, 64)
        assert torch.equal(a.discriminator(y), b.discriminator(y))

    def test_adversarial_smoke_separates_real_from_fake(self):
        # 200 alternating steps on synthetic data: real range images vs
        # fixed fake textures
        torch.manual_seed(1)
        net = TransferNet(n_conditions=2)
        opt = torch.optim.Adam(net.discriminator.parameters(), lr=2e-3)
        rng = np.random.default_rng(0)
        real = torch.tensor(
            np.clip(rng.random((16, 1, 64, 64)) * 0.2 + 0.7, 0, 1), dtype=torch.float32
        )
        fake = torch.tensor(rng.random((16, 1, 64, 64)) * 0.3, dtype=torch.float32)
        for _ in range(200):
            d, _ = gan_loss(net.discriminator(real), net.discriminator(fake))
            opt.zero_grad()
            d.backward()
            opt.step()
        with torch.no_grad():
            assert float(net.discriminator(real).mean()) > \
                float(net.discriminator(fake).mean())


class TestReconLoss:
    def test_zero_at_equality(self):
        x = torch.rand(4, 3, 8, 8)
        assert float(recon_loss(x, x)) == 0.0

    def test_constant_offset_closed_form(self):
        x = torch.rand(2, 3, 8, 8, dtype=torch.float64)
        assert float(recon_loss(x, x + 0.1)) == pytest.approx(0.1, abs=1e-12)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.random((3, 5, 4))
        y = rng.random((3, 5, 4))
        acc = 0.0
        for i in range(3):
            for j in range(5):
                for k in range(4):
                    acc += abs(x[i, j, k] - y[i, j, k])
        acc /= 3 * 5 * 4
        got = float(recon_loss(torch.tensor(x), torch.tensor(y)))
        assert got == pytest.approx(acc, abs=1e-9)

    def test_symmetry_and_shape_check(self):
        x, y = torch.rand(2, 3), torch.rand(2, 3)
        assert float(recon_loss(x, y)) == pytest.approx(float(recon_loss(y, x)))
        with pytest.raises(ValueError):
            recon_loss(torch.rand(2, 3), torch.rand(3, 2))

    def test_gradient_check(self):
        x = torch.rand(4, 4, dtype=torch.float64) * 0.4
        y = torch.rand(4, 4, dtype=torch.float64) * 0.4 + 0.5  # away from kinks
        finite_difference_check(lambda a, b: recon_loss(a, b), [x, y])


class TestGanLoss:
    def test_half_scores_closed_form(self):
        d, g = gan_loss(torch.tensor([0.5]), torch.tensor([0.5]))
        assert float(d) == pytest.approx(-2 * math.log(0.5), abs=1e-6)
        assert float(g) == pytest.approx(-math.log(0.5), abs=1e-6)

    def test_perfect_discriminator_limit(self):
        for eps in (1e-2, 1e-4, 1e-5):
            d, _ = gan_loss(torch.tensor([1 - eps], dtype=torch.float64),
                            torch.tensor([eps], dtype=torch.float64))
            assert float(d) == pytest.approx(-2 * math.log(1 - eps), abs=1e-9)
        d, _ = gan_loss(torch.tensor([1.0]), torch.tensor([0.0]))
        assert np.isfinite(float(d))  # clamping keeps it finite

    def test_matches_direct_formula_oracle(self):
        rng = np.random.default_rng(2)
        real = rng.uniform(0.1, 0.9, size=7)
        fake = rng.uniform(0.1, 0.9, size=5)
        d, g = gan_loss(torch.tensor(real), torch.tensor(fake))
        d_ref = -np.mean([math.log(r) for r in real]) \
            - np.mean([math.log(1 - f) for f in fake])
        g_ref = -np.mean([math.log(f) for f in fake])
        assert float(d) == pytest.approx(d_ref, abs=1e-9)
        assert float(g) == pytest.approx(g_ref, abs=1e-9)

    def test_empty_lists_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            gan_loss(torch.tensor([]), torch.tensor([0.5]))

    def test_gradient_check(self):
        real = torch.tensor(np.random.default_rng(0).uniform(0.2, 0.8, 6))
        fake = torch.tensor(np.random.default_rng(1).uniform(0.2, 0.8, 6))
        finite_difference_check(lambda r, f: gan_loss(r, f)[0], [real, fake])
        finite_difference_check(lambda r, f: gan_loss(r, f)[1], [real, fake])


class TestMutualLoss:
    def setup_method(self):
        torch.manual_seed(0)
        self.proj = torch.randn(32, 64 * 8 * 8, dtype=torch.float64) / 64.0

    def _loss(self, zg, zh, zc, margin=0.5):
        return mutual_latent_loss(zg, zh, zc, self.proj, margin=margin)

    def test_hinge_at_exact_margin(self):
        zg = torch.zeros(64, 8, 8, dtype=torch.float64)
        zh = zg.clone()  # d(zg, zh) = 0
        # craft zc so d(proj(zg), zc) = 0.5
        target = torch.zeros(32, dtype=torch.float64)
        target[0] = 0.5
        assert float(self._loss(zg, zh, target, margin=0.5)) == pytest.approx(0.0, abs=1e-12)

    def test_direct_arithmetic(self):
        zg = torch.zeros(64, 8, 8, dtype=torch.float64)
        zh = zg.clone()
        zh[0, 0, 0] = 0.2  # d(zg, zh) = 0.2
        zc = torch.zeros(32, dtype=torch.float64)
        zc[0] = 0.1  # proj(0) = 0 so d = 0.1
        assert float(self._loss(zg, zh, zc)) == pytest.approx(0.5 + 0.2 - 0.1, abs=1e-12)

    def test_matches_direct_formula_oracle(self):
        rng = np.random.default_rng(4)
        for trial in range(20):
            zg = torch.tensor(rng.normal(size=(64, 8, 8)))
            zh = torch.tensor(rng.normal(size=(64, 8, 8)))
            zc = torch.tensor(rng.normal(size=32))
            d1 = math.sqrt(((zg - zh) ** 2).sum())
            pg = self.proj @ zg.reshape(-1)
            d2 = math.sqrt(((pg - zc) ** 2).sum())
            expect = max(0.0, 0.5 + d1 - d2)
            assert float(self._loss(zg, zh, zc)) == pytest.approx(expect, abs=1e-9)

    def test_nonnegative_and_hinged(self):
        zg = torch.zeros(64, 8, 8, dtype=torch.float64)
        zc = torch.full((32,), 10.0, dtype=torch.float64)
        assert float(self._loss(zg, zg, zc)) == 0.0

    def test_gradient_check(self):
        rng = np.random.default_rng(5)
        zg = torch.tensor(rng.normal(size=(64, 8, 8)))
        zh = torch.tensor(rng.normal(size=(64, 8, 8)) * 2)
        zc = torch.tensor(rng.normal(size=32) * 0.1)  # active hinge
        finite_difference_check(self._loss, [zg, zh, zc])


class TestClassifierLoss:
    def test_uniform_logits(self):
        logits = torch.zeros(1, 4, dtype=torch.float64)
        assert float(classifier_loss(logits, 0)) == pytest.approx(math.log(4), abs=1e-9)

    def test_near_one_hot(self):
        logits = torch.full((1, 4), -20.0, dtype=torch.float64)
        logits[0, 2] = 20.0
        assert float(classifier_loss(logits, 2)) <= 1e-3

    def test_matches_softmax_oracle(self):
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(5, 4))
        labels = rng.integers(0, 4, size=5)
        expect = 0.0
        for row, lab in zip(logits, labels):
            p = np.exp(row - row.max())
            p /= p.sum()
            expect -= math.log(p[lab])
        expect /= 5
        got = float(classifier_loss(torch.tensor(logits), torch.tensor(labels)))
        assert got == pytest.approx(expect, abs=1e-9)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match="label"):
            classifier_loss(torch.zeros(1, 4), 4)

    def test_gradient_check(self):
        logits = torch.tensor(np.random.default_rng(7).normal(size=(3, 4)))
        labels = torch.tensor([0, 2, 1])
        finite_difference_check(lambda lg: classifier_loss(lg, labels), [logits])


class TestTransferLoss:
    def test_component_sum(self):
        rep = transfer_loss(0.2, 0.5, 0.9, 0.1, 0.0)
        assert float(rep.total) == pytest.approx(0.8, abs=1e-12)
        assert float(rep.gan_d) == pytest.approx(0.9)

    def test_all_zero(self):
        rep = transfer_loss(0.0, 0.0, 0.0, 0.0, 0.0)
        assert float(rep.total) == 0.0

    def test_weighted_sum_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            vals = rng.normal(size=5)
            w = rng.uniform(0.1, 2.0, size=4)
            rep = transfer_loss(*vals, w_recon=w[0], w_gan=w[1], w_mutual=w[2],
                                w_classifier=w[3])
            expect = w[0] * vals[0] + w[1] * vals[1] + w[2] * vals[3] + w[3] * vals[4]
            assert float(rep.total) == pytest.approx(expect, abs=1e-9)


class TestCheckpoint:
    def test_round_trip_reproduces_forward_bitwise(self, net, tmp_path):
        path = tmp_path / "t.i3dck"
        save_checkpoint(path, net)
        with open(path, "rb") as f:
            assert f.read(6) == b"I3DCK1"
        other = TransferNet(n_conditions=4, seed=123).eval()
        load_checkpoint(path, other)
        x = torch.rand(2, 3, 64, 64)
        a = transfer_forward(x, net)
        b = transfer_forward(x, other)
        assert torch.equal(a.range_pred, b.range_pred)
        assert torch.equal(a.image_recon, b.image_recon)
        assert torch.equal(a.cond_logits, b.cond_logits)

    def test_projection_matrix_serialized(self, net, tmp_path):
        path = tmp_path / "t.i3dck"
        save_checkpoint(path, net)
        other = TransferNet(n_conditions=4, seed=123)
        assert not torch.equal(other.mutual_projection, net.mutual_projection)
        load_checkpoint(path, other)
        assert torch.equal(other.mutual_projection, net.mutual_projection)

    def test_serialization_is_byte_deterministic(self, net, tmp_path):
        p1, p2 = tmp_path / "a.i3dck", tmp_path / "b.i3dck"
        save_checkpoint(p1, net)
        save_checkpoint(p2, net)
        assert p1.read_bytes() == p2.read_bytes()
