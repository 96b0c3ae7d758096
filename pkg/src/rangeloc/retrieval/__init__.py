from .cluster import cluster_descriptors, save_cluster_csv
from .evaluate import (EvalReport, compute_ape, evaluate_recall,
                       load_distance_matrix, save_distance_matrix,
                       top_percent_candidates)
from .index import (RetrievalIndex, RetrievalResult, build_index, load_index,
                    query_top_k, save_index)
from .odometry import LocalizationFix, fuse_localization, simulate_odometry
