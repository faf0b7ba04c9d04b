"""Teacher-forcing scorer service backed by an autoregressive language model."""

from .config import AdapterConfig
from .engine import ScoringEngine, parse_request
from .server import create_app

__version__ = "0.1.0"
