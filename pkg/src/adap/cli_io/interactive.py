"""Text-prompt stand-in for eyeball feedback: the operator types signed
centimeter estimates which are snapped onto the perception grid."""

from __future__ import annotations

import numpy as np

from ..domain import as_table_vector
from ..perception import PerceptionGrid

ABORT_TOKENS = ("q", "quit", "abort")


class EpisodeAbortedError(RuntimeError):
    pass


def interactive_perceive(context: str = "", grid: PerceptionGrid | None = None,
                         input_fn=input, output_fn=print) -> np.ndarray:
    """Prompt for a 'dx dy' estimate in centimeters; re-prompt until parseable.

    Any abort token cancels the episode.
    """
    grid = grid or PerceptionGrid()
    if context:
        output_fn(context)
    while True:
        raw = input_fn("estimated error in cm ('dx dy', q aborts): ").strip()
        if raw.lower() in ABORT_TOKENS:
            raise EpisodeAbortedError("operator aborted the episode")
        parts = raw.split()
        if len(parts) == 2:
            try:
                cm = np.array([float(parts[0]), float(parts[1])])
            except ValueError:
                pass
            else:
                return grid.snap(cm / 100.0)
        output_fn(f"could not parse {raw!r}; enter two numbers, e.g. '1 -3'")


class InteractivePerceptron:
    """Drop-in perceptron whose estimates come from the terminal.

    The true vector is shown as context (the operator is watching the
    rollout); the typed estimate is what enters the adaptation loop.
    """

    def __init__(self, grid: PerceptionGrid | None = None,
                 input_fn=input, output_fn=print):
        self.grid = grid or PerceptionGrid()
        self._input = input_fn
        self._output = output_fn

    def perceive(self, error) -> np.ndarray:
        e = as_table_vector(error)
        context = (f"observed offset: about {e[0] * 100:+.1f} cm (x), "
                   f"{e[1] * 100:+.1f} cm (y)")
        return interactive_perceive(context, self.grid, self._input, self._output)

    def perceive_result(self, result, goal) -> np.ndarray:
        return self.perceive(as_table_vector(result) - as_table_vector(goal))

    def __call__(self, error) -> np.ndarray:
        return self.perceive(error)
