"""Lower bounds on Stanley-Wilf limits from avoider graphs and their quotients."""

__version__ = "0.1.0"
