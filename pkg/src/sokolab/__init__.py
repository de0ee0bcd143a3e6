"""sokolab: a laboratory for studying planning behavior in recurrent Sokoban agents."""

__version__ = "0.1.0"
