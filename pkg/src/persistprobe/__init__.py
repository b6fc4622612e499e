"""Persistency litmus testing against an emulated memory system and DDR bus probe."""

__version__ = "0.1.0"
