"""Modal graph theory at desk scale: bounded potentialist model checking,
expressibility constructions, control-statement analysis, and the
arithmetic interpretation over finite graphs."""

__version__ = "0.1.0"
