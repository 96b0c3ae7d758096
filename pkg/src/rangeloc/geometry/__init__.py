from .conditions import apply_condition
from .dataset import (PairedDataset, PairedSample, generate_paired_dataset,
                      load_dataset, save_dataset)
from .fileio import (load_png, load_point_cloud, load_range_image,
                     load_trajectory_tum, save_png, save_point_cloud,
                     save_range_image, save_trajectory_tum)
from .projection import (project_points_to_range, render_equirect,
                         splat_values, yaw_shift_equirect)
from .types import (ConditionSpec, PointCloudMap, Pose, Trajectory,
                    check_equirect, check_range_image)
from .world import synthesize_world
