"""Flow-based market coupling simulator comparing standard and advanced hybrid coupling."""

from .config import ScenarioConfig, Setup
from .grid_model import load_grid

__version__ = "0.1.0"

__all__ = ["ScenarioConfig", "Setup", "load_grid", "__version__"]
