"""Batch command-line surface over the pipeline.

Commands: synth | train-transfer | train-descriptor | index | localize |
eval-recall | eval-ape | cluster | plot. Exit codes: 0 success, 1 runtime
failure (one-line machine-readable error on stderr), 2 usage error.
"""

import argparse
import json
import os
import sys

import numpy as np

ERR_CONFIG, ERR_DATA, ERR_TRAIN, ERR_EVAL = "E_CONFIG", "E_DATA", "E_TRAIN", "E_EVAL"

# every tunable reachable from the CLI: name -> (type, default, help)
CONFIG_KEYS = {
    "seed": (int, 0, "master seed for synthesis and training"),
    "extent": (float, 120.0, "world side length, meters"),
    "n_primitives": (int, 40, "number of box/cylinder primitives"),
    "n_poses": (int, 200, "minimum number of loop poses"),
    "ground_pitch": (float, 0.5, "ground sampling pitch, meters"),
    "surface_pitch": (float, 0.4, "primitive surface sampling pitch, meters"),
    "conditions": (str, "clear,dim,warm,fog", "comma-separated condition presets"),
    "h": (int, 64, "image height (polar samples)"),
    "w": (int, 64, "image width (azimuth samples)"),
    "r_max": (float, 30.0, "projection radius, meters"),
    "lr_transfer": (float, 1e-3, "transfer-stage learning rate"),
    "lr_descriptor": (float, 1e-4, "descriptor-stage learning rate"),
    "batch_size": (int, 8, "transfer-stage batch size"),
    "steps_transfer": (int, 1500, "transfer-stage steps"),
    "steps_descriptor": (int, 200, "descriptor-stage steps"),
    "tuple_batch": (int, 4, "tuples per descriptor step"),
    "n_rotations": (int, 2, "rotated members per tuple"),
    "n_positives": (int, 2, "positive members per tuple"),
    "n_negatives": (int, 2, "negative members per tuple"),
    "lam1": (float, 0.5, "latent alignment margin"),
    "lam2": (float, 0.5, "within-domain anchor margin"),
    "lam3": (float, 1.0, "within-domain rotation margin"),
    "lam4": (float, 0.5, "cross-domain anchor margin"),
    "lam5": (float, 1.0, "cross-domain rotation margin"),
    "d_pos": (float, 5.0, "positive distance threshold, meters"),
    "d_neg": (float, 20.0, "negative distance threshold, meters"),
    "min_positive_dist": (float, 0.5, "self-match exclusion radius, meters"),
    "w_classifier": (float, 0.1, "condition classifier loss weight"),
    "w_range_pair": (float, 1.0, "paired range prediction L1 weight"),
    "joint_finetune_steps": (int, 0, "optional joint phase steps (0 = off)"),
    "lr_joint": (float, 1e-5, "joint phase learning rate"),
    "visual_source": (str, "transfer", "descriptor visual branch: transfer | raw"),
    "top_percent": (float, 1.0, "retrieval candidate percentage"),
    "success_dist": (float, 10.0, "retrieval success distance, meters"),
    "condition_filter": (int, -1, "restrict queries to one condition label (-1 = all)"),
    "drift_rate": (float, 0.01, "odometry drift fraction"),
    "odom_noise_sigma": (float, 0.0, "odometry heading noise, radians/step"),
    "fix_gate": (float, 0.8, "max descriptor distance for accepting a fix"),
    "fix_interval": (int, 1, "attempt a retrieval fix every N frames"),
    "clusters": (int, 10, "k-means cluster count"),
    "query_rotations": (str, "", "comma-separated query yaw angles for sweeps"),
}


class RunConfig(dict):
    @classmethod
    def resolve(cls, config_file=None, overrides=()):
        cfg = cls((k, v[1]) for k, v in CONFIG_KEYS.items())
        pairs = []
        if config_file:
            with open(config_file) as f:
                for line in f:
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    if "=" not in line:
                        raise ValueError(f"bad config line {line!r}")
                    pairs.append(line.split("=", 1))
        for item in overrides:
            if "=" not in item:
                raise ValueError(f"bad --set value {item!r} (need key=value)")
            pairs.append(item.split("=", 1))
        for key, val in pairs:
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"unknown config key {key!r}")
            typ = CONFIG_KEYS[key][0]
            cfg[key] = typ(val.strip())
        return cfg

    def write_resolved(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.resolved.txt"), "w") as f:
            for key in sorted(self):
                f.write(f"{key}={self[key]}\n")


def _train_config(cfg):
    from .descriptor.losses import MarginConfig
    from .training.config import TrainConfig

    margins = MarginConfig(lam1=cfg["lam1"], lam2=cfg["lam2"], lam3=cfg["lam3"],
                           lam4=cfg["lam4"], lam5=cfg["lam5"],
                           d_pos=cfg["d_pos"], d_neg=cfg["d_neg"])
    return TrainConfig(
        seed=cfg["seed"], lr_transfer=cfg["lr_transfer"],
        lr_descriptor=cfg["lr_descriptor"], batch_size=cfg["batch_size"],
        steps_transfer=cfg["steps_transfer"], steps_descriptor=cfg["steps_descriptor"],
        margins=margins, w_classifier=cfg["w_classifier"],
        n_rotations=cfg["n_rotations"], n_positives=cfg["n_positives"],
        n_negatives=cfg["n_negatives"], tuple_batch=cfg["tuple_batch"],
        min_positive_dist=cfg["min_positive_dist"],
        joint_finetune_steps=cfg["joint_finetune_steps"], lr_joint=cfg["lr_joint"],
    )


def _load_nets(cfg, transfer_path=None, descriptor_path=None):
    import torch

    from .descriptor.model import PlaceDescriptorNet
    from .transfer.checkpoint import load_checkpoint
    from .transfer.networks import TransferNet

    torch.manual_seed(cfg["seed"])
    transfer_net = descriptor_net = None
    if transfer_path:
        n_cond = max(2, len(cfg["conditions"].split(",")))
        transfer_net = TransferNet(n_conditions=n_cond, seed=cfg["seed"])
        load_checkpoint(transfer_path, transfer_net)
        transfer_net.eval()
    if descriptor_path:
        descriptor_net = PlaceDescriptorNet(seed=cfg["seed"] + 1)
        load_checkpoint(descriptor_path, descriptor_net)
        descriptor_net.eval()
    return transfer_net, descriptor_net


def _query_samples(dataset, cfg):
    label = cfg["condition_filter"]
    samples = [s for s in dataset.samples
               if label < 0 or s.condition_label == label]
    if not samples:
        raise ValueError(f"no samples with condition label {label}")
    return samples


def cmd_synth(cfg, args):
    from .geometry.conditions import make_conditions
    from .geometry.dataset import generate_paired_dataset, save_dataset
    from .geometry.world import synthesize_world

    cloud, traj = synthesize_world(
        cfg["seed"], cfg["extent"], cfg["n_primitives"], n_poses=cfg["n_poses"],
        ground_pitch=cfg["ground_pitch"], surface_pitch=cfg["surface_pitch"],
    )
    conditions = make_conditions(cfg["conditions"].split(","), base_seed=cfg["seed"])
    dataset = generate_paired_dataset(cloud, traj, conditions,
                                      cfg["h"], cfg["w"], cfg["r_max"])
    save_dataset(args.out, cloud, traj, dataset)
    cfg.write_resolved(args.out)
    print(f"synthesized {len(dataset)} pairs over {len(traj)} poses -> {args.out}")
    return 0


def cmd_train_transfer(cfg, args):
    from .geometry.dataset import load_dataset
    from .training.stages import train_transfer

    dataset = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)
    net = train_transfer(
        dataset, _train_config(cfg),
        log_path=os.path.join(args.out, "loss_log.csv"),
        checkpoint_path=os.path.join(args.out, "transfer.i3dck"),
        w_range_pair=cfg["w_range_pair"],
    )
    cfg.write_resolved(args.out)
    print(f"transfer checkpoint -> {os.path.join(args.out, 'transfer.i3dck')}")
    return 0


def cmd_train_descriptor(cfg, args):
    from .geometry.dataset import load_dataset
    from .training.stages import train_descriptor
    from .transfer.checkpoint import save_checkpoint

    dataset = load_dataset(args.data)
    transfer_net, _ = _load_nets(cfg, transfer_path=args.transfer)
    os.makedirs(args.out, exist_ok=True)
    desc = train_descriptor(
        dataset, transfer_net, _train_config(cfg),
        log_path=os.path.join(args.out, "loss_log.csv"),
        visual_source=cfg["visual_source"],
    )
    save_checkpoint(os.path.join(args.out, "descriptor.i3dck"), desc)
    cfg.write_resolved(args.out)
    print(f"descriptor checkpoint -> {os.path.join(args.out, 'descriptor.i3dck')}")
    return 0


def cmd_index(cfg, args):
    from .descriptor.descio import save_descriptors
    from .geometry.dataset import load_dataset
    from .geometry.types import Trajectory
    from .pipeline import compute_range_descriptors
    from .retrieval.index import load_index

    os.makedirs(args.out, exist_ok=True)
    out_file = os.path.join(args.out, "database.i3dds")
    if args.from_descriptors:
        index = load_index(args.from_descriptors)  # validates the file
        with open(args.from_descriptors, "rb") as src, open(out_file, "wb") as dst:
            dst.write(src.read())
        print(f"validated external descriptors ({len(index)}) -> {out_file}")
        cfg.write_resolved(args.out)
        return 0

    dataset = load_dataset(args.data)
    _, desc_net = _load_nets(cfg, descriptor_path=args.descriptor)
    seen = {}
    for s in dataset.samples:
        seen.setdefault(s.pose_index, (s.range_image, s.pose))
    pose_order = sorted(seen)
    ranges = np.stack([seen[i][0] for i in pose_order])
    poses = [seen[i][1] for i in pose_order]
    descs = compute_range_descriptors(ranges, desc_net)
    save_descriptors(out_file, descs, Trajectory(poses, max_step=np.inf))
    cfg.write_resolved(args.out)
    print(f"indexed {len(pose_order)} range projections -> {out_file}")
    return 0


def cmd_localize(cfg, args):
    from .descriptor.descio import save_descriptors
    from .geometry.dataset import load_dataset
    from .geometry.fileio import save_trajectory_tum
    from .geometry.types import Trajectory
    from .pipeline import compute_visual_descriptors
    from .retrieval.evaluate import compute_ape
    from .retrieval.index import load_index, query_top_k
    from .retrieval.odometry import (LocalizationFix, fuse_localization,
                                     simulate_odometry)

    dataset = load_dataset(args.data)
    transfer_net, desc_net = _load_nets(cfg, args.transfer, args.descriptor)
    index = load_index(args.index)
    samples = _query_samples(dataset, cfg)
    os.makedirs(args.out, exist_ok=True)

    images = np.stack([s.image for s in samples])
    descs = compute_visual_descriptors(images, transfer_net, desc_net,
                                       source=cfg["visual_source"])
    gt = Trajectory([s.pose for s in samples], max_step=np.inf)
    save_descriptors(os.path.join(args.out, "queries.i3dds"), descs, gt)

    odometry = simulate_odometry(gt, cfg["drift_rate"], cfg["odom_noise_sigma"],
                                 seed=cfg["seed"])
    fixes = []
    rows = ["frame,timestamp,top1_id,desc_dist,accepted"]
    for i, (d, pose) in enumerate(zip(descs, gt.poses)):
        if i % cfg["fix_interval"]:
            continue
        res = query_top_k(index, d, 1)
        accepted = res.distances[0] <= cfg["fix_gate"]
        if accepted:
            fixes.append(LocalizationFix(pose.timestamp,
                                         index.positions[res.ids[0]], True))
        rows.append(f"{i},{pose.timestamp:.9g},{res.ids[0]},"
                    f"{res.distances[0]:.6g},{int(accepted)}")
    fused = fuse_localization(odometry, fixes)

    save_trajectory_tum(os.path.join(args.out, "odometry.tum"), odometry)
    save_trajectory_tum(os.path.join(args.out, "fused.tum"), fused)
    with open(os.path.join(args.out, "fixes.csv"), "w") as f:
        f.write("\n".join(rows) + "\n")
    ape_odo = compute_ape(odometry, gt)
    ape_fused = compute_ape(fused, gt)
    summary = {
        "n_queries": len(samples), "n_fixes": len(fixes),
        "ape_odometry_mean": ape_odo[0], "ape_odometry_std": ape_odo[1],
        "ape_fused_mean": ape_fused[0], "ape_fused_std": ape_fused[1],
    }
    with open(os.path.join(args.out, "localization.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    cfg.write_resolved(args.out)
    print(f"fused APE {ape_fused[0]:.2f} m vs odometry {ape_odo[0]:.2f} m "
          f"({len(fixes)} fixes) -> {args.out}")
    return 0


def cmd_eval_recall(cfg, args):
    from .descriptor.descio import load_descriptors
    from .geometry.dataset import load_dataset
    from .pipeline import compute_visual_descriptors
    from .retrieval.evaluate import evaluate_recall, save_distance_matrix
    from .retrieval.index import load_index

    index = load_index(args.index)
    os.makedirs(args.out, exist_ok=True)

    if args.queries:
        descs, traj = load_descriptors(args.queries)
        positions = traj.positions()
    else:
        if not (args.data and args.transfer and args.descriptor):
            raise ValueError("need either --queries or --data/--transfer/--descriptor")
        dataset = load_dataset(args.data)
        transfer_net, desc_net = _load_nets(cfg, args.transfer, args.descriptor)
        samples = _query_samples(dataset, cfg)
        images = np.stack([s.image for s in samples])
        positions = np.stack([s.pose.position for s in samples])
        descs = compute_visual_descriptors(images, transfer_net, desc_net,
                                           source=cfg["visual_source"])

    report, matrix = evaluate_recall(index, descs, positions,
                                     top_percent=cfg["top_percent"],
                                     success_dist=cfg["success_dist"])

    if cfg["query_rotations"] and not args.queries:
        import numpy.random as npr
        by_rotation = {}
        for token in cfg["query_rotations"].split(","):
            angle = float(token)
            rot_desc = compute_visual_descriptors(
                images, transfer_net, desc_net, source=cfg["visual_source"],
                rotations_deg=np.full(len(images), angle),
            )
            rep, _ = evaluate_recall(index, rot_desc, positions,
                                     top_percent=cfg["top_percent"],
                                     success_dist=cfg["success_dist"])
            by_rotation[token.strip()] = rep.recall_top1pct
        report.extras["recall_by_rotation"] = by_rotation

    report.to_json(os.path.join(args.out, "report.json"))
    save_distance_matrix(os.path.join(args.out, "distances.i3ddm"), matrix)
    cfg.write_resolved(args.out)
    print(f"recall@top{cfg['top_percent']:g}%: {report.recall_top1pct:.4f} "
          f"(top-1 {report.recall_top1:.4f}) -> {args.out}")
    return 0


def cmd_eval_ape(cfg, args):
    from .geometry.fileio import load_trajectory_tum
    from .retrieval.evaluate import compute_ape

    est = load_trajectory_tum(args.estimate)
    ref = load_trajectory_tum(args.reference)
    mean, std = compute_ape(est, ref)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "ape.json"), "w") as f:
        json.dump({"ape_mean": mean, "ape_std": std, "count": len(est)},
                  f, indent=2, sort_keys=True)
        f.write("\n")
    cfg.write_resolved(args.out)
    print(f"APE mean {mean:.3f} m std {std:.3f} m -> {args.out}")
    return 0


def cmd_cluster(cfg, args):
    from .descriptor.descio import load_descriptors
    from .retrieval.cluster import cluster_descriptors, save_cluster_csv

    descs, _ = load_descriptors(args.descriptors)
    labels, centers, inertia = cluster_descriptors(descs, k=cfg["clusters"],
                                                   seed=cfg["seed"])
    os.makedirs(args.out, exist_ok=True)
    save_cluster_csv(os.path.join(args.out, "clusters.csv"), labels)
    cfg.write_resolved(args.out)
    print(f"{cfg['clusters']} clusters, inertia {inertia:.4f} -> {args.out}")
    return 0


def cmd_plot(cfg, args):
    from .plots import (plot_distance_matrix, plot_loss_curves,
                        plot_recall_by_rotation)
    from .retrieval.evaluate import load_distance_matrix

    os.makedirs(args.out, exist_ok=True)
    made = []
    report = None
    if args.report:
        with open(args.report) as f:
            report = json.load(f)
    if args.loss_csv:
        out = os.path.join(args.out, "loss_curves.png")
        plot_loss_curves(args.loss_csv, out)
        made.append(out)
    if args.distance_matrix:
        matrix = load_distance_matrix(args.distance_matrix)
        out = os.path.join(args.out, "distance_matrix.png")
        plot_distance_matrix(matrix, out,
                             per_query=report.get("per_query") if report else None)
        made.append(out)
    if report and report.get("recall_by_rotation"):
        angles = [float(a) for a in report["recall_by_rotation"]]
        recalls = list(report["recall_by_rotation"].values())
        out = os.path.join(args.out, "recall_by_rotation.png")
        plot_recall_by_rotation(angles, recalls, out,
                                baseline=report.get("recall_top1pct"))
        made.append(out)
    if not made:
        raise ValueError("nothing to plot: pass --loss-csv, --distance-matrix, or --report")
    cfg.write_resolved(args.out)
    print("wrote " + ", ".join(made))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rangeloc",
        description="Image-to-range place recognition pipeline on synthetic worlds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra):
        p = sub.add_parser(name)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="config override (repeatable)")
        for arg, kw in extra.items():
            p.add_argument(f"--{arg.replace('_', '-')}", **kw)
        p.set_defaults(fn=fn)
        return p

    add("synth", cmd_synth)
    add("train-transfer", cmd_train_transfer, data=dict(required=True))
    add("train-descriptor", cmd_train_descriptor, data=dict(required=True),
        transfer=dict(required=True))
    add("index", cmd_index, data=dict(), descriptor=dict(),
        from_descriptors=dict(help="use an external descriptor file"))
    add("localize", cmd_localize, data=dict(required=True),
        transfer=dict(required=True), descriptor=dict(required=True),
        index=dict(required=True))
    add("eval-recall", cmd_eval_recall, index=dict(required=True),
        queries=dict(), data=dict(), transfer=dict(), descriptor=dict())
    add("eval-ape", cmd_eval_ape, estimate=dict(required=True),
        reference=dict(required=True))
    add("cluster", cmd_cluster, descriptors=dict(required=True))
    add("plot", cmd_plot, loss_csv=dict(), distance_matrix=dict(), report=dict())
    return parser


def run_command(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.resolve(args.config, args.set)
    except (ValueError, OSError) as exc:
        print(f"{ERR_CONFIG}: {exc}", file=sys.stderr)
        return 1
    try:
        return args.fn(cfg, args)
    except Exception as exc:  # classify for machine-readable one-liners
        from .training.stages import TrainingDiverged

        if isinstance(exc, TrainingDiverged):
            code = ERR_TRAIN
        elif isinstance(exc, (FileNotFoundError, OSError)):
            code = ERR_DATA
        elif args.command in ("eval-recall", "eval-ape", "cluster", "plot"):
            code = ERR_EVAL
        elif args.command in ("train-transfer", "train-descriptor"):
            code = ERR_TRAIN
        elif isinstance(exc, (ValueError, KeyError)):
            code = ERR_DATA
        else:
            code = ERR_EVAL
        print(f"{code}: {exc}", file=sys.stderr)
        return 1


def main():
    import torch

    torch.set_num_threads(max(1, os.cpu_count()))
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
