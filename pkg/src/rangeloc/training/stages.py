"""Staged optimization: transfer module first, then place descriptors against
the frozen transfer model. An optional joint fine-tuning phase is off by
default."""

import numpy as np
import torch

from ..descriptor.losses import domain_loss, view_loss
from ..descriptor.model import PlaceDescriptorNet, describe
from ..geometry.projection import yaw_shift_equirect
from ..transfer.checkpoint import save_checkpoint, state_checksum
from ..transfer.losses import (classifier_loss, gan_loss, mutual_latent_loss,
                               recon_loss, transfer_loss)
from ..transfer.networks import TransferNet, as_image_batch
from .config import TrainConfig
from .tuples import mine_tuple

LOG_HEADER = "step,recon,gan_g,gan_d,mutual,classifier,view,domain,total"


class TrainingDiverged(RuntimeError):
    def __init__(self, step, components):
        self.step = step
        self.components = components
        super().__init__(f"non-finite loss at step {step}: {components}")


def _check_finite(step, report_dict):
    if not all(np.isfinite(v) for v in report_dict.values()):
        raise TrainingDiverged(step, report_dict)


def write_loss_log(path, rows):
    if path is None:
        return
    with open(path, "w") as f:
        f.write(LOG_HEADER + "\n")
        for r in rows:
            f.write(
                f"{r['step']},{r['recon']:.6g},{r['gan_g']:.6g},{r['gan_d']:.6g},"
                f"{r['mutual']:.6g},{r['classifier']:.6g},{r['view']:.6g},"
                f"{r['domain']:.6g},{r['total']:.6g}\n"
            )


def _dataset_tensors(dataset):
    images = torch.stack([as_image_batch(s.image)[0] for s in dataset.samples])
    pose_ranges = {}
    for s in dataset.samples:
        if s.pose_index not in pose_ranges:
            pose_ranges[s.pose_index] = torch.as_tensor(
                s.range_image, dtype=torch.float32
            )
    labels = torch.as_tensor(dataset.labels(), dtype=torch.long)
    return images, pose_ranges, labels


def train_transfer(dataset, config: TrainConfig, log_path=None,
                   checkpoint_path=None, w_range_pair: float = 1.0) -> TransferNet:
    """Alternating discriminator/generator updates on the paired dataset.

    The generator objective is the transfer total plus a paired L1 term
    between the range prediction and the pose's true projection; the GAN
    alone only matches range style, the paired term pins the geometry.
    """
    torch.manual_seed(config.seed)
    net = TransferNet(n_conditions=max(2, len(dataset.conditions)), seed=config.seed)
    images, pose_ranges, labels = _dataset_tensors(dataset)
    pose_idx = dataset.pose_indices()
    n = len(dataset)

    gen_params = (
        list(net.image_encoder.parameters())
        + list(net.range_decoder.parameters())
        + list(net.range_encoder.parameters())
        + list(net.image_decoder.parameters())
        + list(net.condition_classifier.parameters())
    )
    opt_g = torch.optim.Adam(gen_params, lr=config.lr_transfer)
    opt_d = torch.optim.Adam(net.discriminator.parameters(), lr=config.lr_transfer)

    rows = []
    net.train()
    for step in range(config.steps_transfer):
        rng = np.random.Generator(np.random.PCG64((config.seed, 7, step)))
        idx = rng.choice(n, size=min(config.batch_size, n), replace=False)
        x = images[idx]
        y_true = torch.stack([pose_ranges[pose_idx[i]] for i in idx])[:, None]
        lab = labels[idx]

        # discriminator update on real projections vs detached predictions
        out = net(x)
        real_scores = net.discriminator(y_true)
        fake_scores = net.discriminator(out.range_pred.detach())
        gan_d, _ = gan_loss(real_scores, fake_scores)
        opt_d.zero_grad()
        gan_d.backward()
        opt_d.step()

        # generator update
        out = net(x)
        fake_scores = net.discriminator(out.range_pred)
        _, gan_g = gan_loss(net.discriminator(y_true).detach(), fake_scores)
        rec = recon_loss(x, out.image_recon)
        mut = mutual_latent_loss(out.latent.geometry, out.geo_from_range,
                                 out.latent.condition, net.mutual_projection,
                                 margin=config.margins.lam1)
        cls = classifier_loss(out.cond_logits, lab)
        report = transfer_loss(rec, gan_g, gan_d.detach(), mut, cls,
                               w_classifier=config.w_classifier)
        pair = (out.range_pred - y_true).abs().mean()
        objective = report.total + w_range_pair * pair
        opt_g.zero_grad()
        objective.backward()
        opt_g.step()

        row = {"step": step, **report.as_floats(), "view": 0.0, "domain": 0.0}
        _check_finite(step, row)
        rows.append(row)
        if checkpoint_path and config.checkpoint_every and \
                (step + 1) % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, net)

    net.eval()
    write_loss_log(log_path, rows)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, net)
    return net


def _valid_anchor_ids(positions, margins, min_positive_dist):
    positions = np.asarray(positions)
    valid = []
    for i in range(len(positions)):
        d = np.linalg.norm(positions - positions[i], axis=1)
        has_pos = np.any((d <= margins.d_pos) & (d > min_positive_dist))
        has_neg = np.any(d >= margins.d_neg)
        if has_pos and has_neg:
            valid.append(i)
    return np.array(valid)


def _visual_input(net, images, source):
    """Map an image batch to the descriptor input domain."""
    if source == "raw":
        return images.mean(dim=1)  # grayscale panorama
    with torch.no_grad():
        return net.range_decoder(net.image_encoder(images).geometry)[:, 0]


def train_descriptor(dataset, transfer_net: TransferNet, config: TrainConfig,
                     log_path=None, visual_source: str = "transfer",
                     descriptor_net: PlaceDescriptorNet = None) -> PlaceDescriptorNet:
    """Minimize the within-domain and cross-domain place losses over mined
    tuples with the transfer model frozen.

    visual_source="raw" trains the ablated variant whose visual branch sees
    grayscale images instead of range predictions.
    """
    torch.manual_seed(config.seed + 1)
    desc = descriptor_net or PlaceDescriptorNet(seed=config.seed + 1)
    transfer_net.eval()
    for p in transfer_net.parameters():
        p.requires_grad_(False)
    checksum_before = state_checksum(transfer_net)

    images, pose_ranges, _ = _dataset_tensors(dataset)
    positions = dataset.positions()
    pose_idx = dataset.pose_indices()
    margins = config.margins
    valid = _valid_anchor_ids(positions, margins, config.min_positive_dist)
    if valid.size == 0:
        raise ValueError("no valid anchors under the distance thresholds")

    opt = torch.optim.Adam(desc.parameters(), lr=config.lr_descriptor)
    rows = []
    for step in range(config.steps_descriptor):
        rng = np.random.Generator(np.random.PCG64((config.seed, 11, step)))
        anchors = rng.choice(valid, size=min(config.tuple_batch, valid.size),
                             replace=False)
        tuples = [
            mine_tuple(positions, int(a), margins, seed=config.seed,
                       n_rotations=config.n_rotations,
                       n_positives=config.n_positives,
                       n_negatives=config.n_negatives,
                       min_positive_dist=config.min_positive_dist)
            for a in anchors
        ]

        # assemble one flat batch: visual members first, then range members
        vis_inputs, rng_inputs, spans = [], [], []
        for tup in tuples:
            v0 = len(vis_inputs)
            vis_inputs.append(images[tup.anchor])
            for sid, angle in tup.rotated:
                rot = yaw_shift_equirect(images[sid].permute(1, 2, 0).numpy(), angle)
                vis_inputs.append(torch.as_tensor(rot, dtype=torch.float32).permute(2, 0, 1))
            for i in tup.positives:
                vis_inputs.append(images[i])
            for i in tup.negatives:
                vis_inputs.append(images[i])

            r0 = len(rng_inputs)
            rng_inputs.append(pose_ranges[pose_idx[tup.anchor]])
            for sid, angle in tup.rotated:
                rot = yaw_shift_equirect(pose_ranges[pose_idx[sid]].numpy(), angle)
                rng_inputs.append(torch.as_tensor(rot, dtype=torch.float32))
            for i in tup.positives:
                rng_inputs.append(pose_ranges[pose_idx[i]])
            for i in tup.negatives:
                rng_inputs.append(pose_ranges[pose_idx[i]])
            spans.append((v0, r0, len(tup.rotated), len(tup.positives),
                          len(tup.negatives)))

        vis_batch = _visual_input(transfer_net, torch.stack(vis_inputs), visual_source)
        all_inputs = torch.cat([vis_batch, torch.stack(rng_inputs)], dim=0)
        descs = desc(all_inputs)
        n_vis = vis_batch.shape[0]

        v_total = torch.zeros((), dtype=descs.dtype)
        d_total = torch.zeros((), dtype=descs.dtype)
        for (v0, r0, n_rot, n_pos, n_neg) in spans:
            dv = descs[v0: v0 + 1 + n_rot + n_pos + n_neg]
            dl = descs[n_vis + r0: n_vis + r0 + 1 + n_rot + n_pos + n_neg]
            va, vr = dv[0], dv[1:1 + n_rot]
            vp = dv[1 + n_rot:1 + n_rot + n_pos]
            vn = dv[1 + n_rot + n_pos:]
            la, lr = dl[0], dl[1:1 + n_rot]
            lp = dl[1 + n_rot:1 + n_rot + n_pos]
            ln = dl[1 + n_rot + n_pos:]
            v_total = v_total + view_loss(va, vr, vp, vn, margins) \
                + view_loss(la, lr, lp, ln, margins)
            d_total = d_total + domain_loss(va, vr, lp, ln, margins)
        v_total = v_total / len(spans)
        d_total = d_total / len(spans)
        objective = v_total + d_total

        opt.zero_grad()
        objective.backward()
        opt.step()

        # transfer components logged (not optimized) on the anchor images
        with torch.no_grad():
            ax = torch.stack([images[t.anchor] for t in tuples])
            ay = torch.stack([pose_ranges[pose_idx[t.anchor]] for t in tuples])[:, None]
            out = transfer_net(ax)
            gan_d, gan_g = gan_loss(transfer_net.discriminator(ay),
                                    transfer_net.discriminator(out.range_pred))
            rec = recon_loss(ax, out.image_recon)
            mut = mutual_latent_loss(out.latent.geometry, out.geo_from_range,
                                     out.latent.condition,
                                     transfer_net.mutual_projection,
                                     margin=margins.lam1)
            report = transfer_loss(rec, gan_g, gan_d, mut, torch.zeros(()),
                                   w_classifier=config.w_classifier)
        row = {"step": step, **report.as_floats(),
               "view": float(v_total), "domain": float(d_total)}
        row["total"] = row["total"] + row["view"] + row["domain"]
        _check_finite(step, row)
        rows.append(row)

    if config.joint_finetune_steps > 0:
        _joint_finetune(dataset, transfer_net, desc, config, rows)

    checksum_after = state_checksum(transfer_net)
    if config.joint_finetune_steps == 0 and checksum_before != checksum_after:
        raise RuntimeError("descriptor stage mutated transfer parameters")
    write_loss_log(log_path, rows)
    return desc


def _joint_finetune(dataset, transfer_net, desc, config: TrainConfig, rows):
    """Optional third phase: all losses, small learning rate, everything live."""
    for p in transfer_net.parameters():
        p.requires_grad_(True)
    transfer_net.train()
    images, pose_ranges, labels = _dataset_tensors(dataset)
    positions = dataset.positions()
    pose_idx = dataset.pose_indices()
    margins = config.margins
    valid = _valid_anchor_ids(positions, margins, config.min_positive_dist)
    opt = torch.optim.Adam(
        list(desc.parameters()) + [p for p in transfer_net.parameters()],
        lr=config.lr_joint,
    )
    base_step = len(rows)
    for step in range(config.joint_finetune_steps):
        rng = np.random.Generator(np.random.PCG64((config.seed, 13, step)))
        anchors = rng.choice(valid, size=min(config.tuple_batch, valid.size),
                             replace=False)
        objective = torch.zeros(())
        v_val = d_val = 0.0
        report = None
        for a in anchors:
            tup = mine_tuple(positions, int(a), margins, seed=config.seed,
                             n_rotations=config.n_rotations,
                             n_positives=config.n_positives,
                             n_negatives=config.n_negatives,
                             min_positive_dist=config.min_positive_dist)
            x = images[[tup.anchor]]
            y = pose_ranges[pose_idx[tup.anchor]][None, None]
            out = transfer_net(x)
            gan_d, gan_g = gan_loss(transfer_net.discriminator(y),
                                    transfer_net.discriminator(out.range_pred))
            rec = recon_loss(x, out.image_recon)
            mut = mutual_latent_loss(out.latent.geometry, out.geo_from_range,
                                     out.latent.condition,
                                     transfer_net.mutual_projection,
                                     margin=margins.lam1)
            cls = classifier_loss(out.cond_logits, labels[[tup.anchor]])
            report = transfer_loss(rec, gan_g, gan_d, mut, cls,
                                   w_classifier=config.w_classifier)

            vis = transfer_net.range_decoder(
                transfer_net.image_encoder(
                    torch.cat([x] + [images[[i]] for i in tup.positives + tup.negatives])
                ).geometry
            )[:, 0]
            rngs = torch.stack(
                [pose_ranges[pose_idx[tup.anchor]]]
                + [pose_ranges[pose_idx[i]] for i in tup.positives + tup.negatives]
            )
            dv = desc(vis)
            dl = desc(rngs)
            np_, nn_ = len(tup.positives), len(tup.negatives)
            vl = view_loss(dv[0], dv[:1], dv[1:1 + np_], dv[1 + np_:], margins) \
                + view_loss(dl[0], dl[:1], dl[1:1 + np_], dl[1 + np_:], margins)
            dl_loss = domain_loss(dv[0], dv[:1], dl[1:1 + np_], dl[1 + np_:], margins)
            objective = objective + report.total + vl + dl_loss
            v_val += float(vl)
            d_val += float(dl_loss)
        opt.zero_grad()
        objective.backward()
        opt.step()
        row = {"step": base_step + step, **report.as_floats(),
               "view": v_val / len(anchors), "domain": d_val / len(anchors)}
        _check_finite(base_step + step, row)
        rows.append(row)
    transfer_net.eval()
    for p in transfer_net.parameters():
        p.requires_grad_(False)
