from .config import TrainConfig
from .stages import (LOG_HEADER, TrainingDiverged, train_descriptor,
                     train_transfer, write_loss_log)
from .tuples import ROTATION_GRID, TrainingTuple, check_tuple, mine_tuple
