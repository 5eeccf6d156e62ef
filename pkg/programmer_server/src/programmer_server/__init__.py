"""Fine-tune-and-serve harness for a small edit-action programmer.

Consumes the training-file schema (JSON-lines ``{"input", "target"}``
with ``<sep>``-joined inputs and action-script targets) and exposes the
``POST /predict`` + ``GET /healthz`` wire contract.
"""

from .errors import DataError
from .grammar import action_f1, parse_actions
from .train import TrainJob, train

__version__ = "0.1.0"

__all__ = ["DataError", "TrainJob", "action_f1", "parse_actions", "train", "__version__"]
