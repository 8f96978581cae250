from strategies.curved import build_theorem7_curved
from strategies.simplex import build_theorem8_simplex
from strategies.theorem5 import build_theorem5

__all__ = ["build_theorem5", "build_theorem7_curved", "build_theorem8_simplex"]
