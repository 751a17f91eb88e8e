"""lsq: a proof language for superposition and measurement"""

__version__ = "0.1.0"
