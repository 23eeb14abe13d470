"""Student performance prediction for interactive question pools.

The pipeline ingests mouse-event logs, splits each trajectory into think /
first-attempt / following stages, extracts interaction features, links
questions through shared solvers to score their similarity, assembles
baseline and similarity-augmented feature vectors, balances classes with
SMOTE, trains native classifiers, and evaluates accuracy, weighted F1,
one-vs-rest ROC/AUC, and ABROCA.
"""

from mousetrail._accel import NUMBA_ENABLED, backend_name

__version__ = "0.1.0"

__all__ = ["NUMBA_ENABLED", "backend_name", "__version__"]
