"""Shot-wise distribution of a quantum circuit's shots over several noisy backends."""

from shotwise.probdist import Counts, ProbDist, hellinger, bhattacharyya_angle

__version__ = "0.1.0"

__all__ = ["Counts", "ProbDist", "hellinger", "bhattacharyya_angle", "__version__"]
