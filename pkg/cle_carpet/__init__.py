"""
CarpetLab
Chemical distance on conformal loop ensemble carpets, with the stable-process checks behind them
"""

from .config import TOOL_VERSION

__version__ = TOOL_VERSION
