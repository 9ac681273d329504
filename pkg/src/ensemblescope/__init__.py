"""ensemblescope: interactive exploration engine for classifier ensembles.

Builds a library of heterogeneous classifiers over a tabular dataset, caches
test and out-of-fold predictions, auto-selects a starting ensemble by greedy
search, and serves an interactive session API where data selections and
model toggles update each other instantly.
"""

from .dataio import Attribute, DataError, Dataset, EncodedView, encode, load_csv, split_and_fold
from .ensemble import EnsembleState, SelectionTrace, auto_select, combine, evaluate, guard_check
from .library import ModelLibrary, build_library, load_library, save_library
from .models import ModelSpec, default_grid, small_grid
from .session import GuardPolicy, Session, SessionConfig, SessionStore

__version__ = "0.1.0"

__all__ = [
    "Attribute",
    "DataError",
    "Dataset",
    "EncodedView",
    "EnsembleState",
    "GuardPolicy",
    "ModelLibrary",
    "ModelSpec",
    "SelectionTrace",
    "Session",
    "SessionConfig",
    "SessionStore",
    "auto_select",
    "build_library",
    "combine",
    "default_grid",
    "encode",
    "evaluate",
    "guard_check",
    "load_csv",
    "load_library",
    "save_library",
    "small_grid",
    "split_and_fold",
    "__version__",
]
