"""hisariq: I/Q modulation dataset workbench and CNN classifier."""

__version__ = "0.1.0"
