from .config import (ConfigError, ExperimentConfig, ParseError, SchemaError,
                     config_from_dict, parse_config)
from .checkpoint import (ConfigMismatchError, CorruptCheckpointError,
                         load_checkpoint, save_checkpoint)
from .interactive import EpisodeAbortedError, InteractivePerceptron, interactive_perceive
from .report import replay_episodes, write_report

__all__ = [
    "ConfigError", "ConfigMismatchError", "CorruptCheckpointError",
    "EpisodeAbortedError", "ExperimentConfig", "InteractivePerceptron",
    "ParseError", "SchemaError", "config_from_dict", "interactive_perceive",
    "load_checkpoint", "parse_config", "replay_episodes", "save_checkpoint",
    "write_report",
]
