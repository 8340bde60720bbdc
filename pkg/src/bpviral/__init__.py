"""Simulation and mean-field analysis of population-dependent branching
processes with applications to viral-content markets: attack/acquisition
competition, fake-post warning mechanisms, saturated single-post markets,
and a participation game for post-actuality identification."""

__version__ = "0.1.0"
