from .augment import shift_frames, timeline_shift
from .network import NetShapes, NotTrainedError
from .planner import DiffusionPlanner, sample, train
from .schedule import NoiseSchedule, make_schedule, q_sample
from .training import TrainConfig

__all__ = [
    "DiffusionPlanner", "NetShapes", "NoiseSchedule", "NotTrainedError",
    "TrainConfig", "make_schedule", "q_sample", "sample", "shift_frames",
    "timeline_shift", "train",
]
