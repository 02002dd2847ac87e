"""Security analysis toolkit for three-pulse differential-phase-shift QKD."""

__version__ = "0.1.0"
