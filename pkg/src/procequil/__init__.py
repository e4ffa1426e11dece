"""Process tensors, their equilibrium counterparts and the bounds that relate them."""

from .config import RunConfig, load_config
from .errors import ProcequilError
from .sim import *  # noqa: F401,F403
from .sim import __all__ as _sim_all

__version__ = "0.1.0"

__all__ = ["ProcequilError", "RunConfig", "load_config", "__version__", *_sim_all]
