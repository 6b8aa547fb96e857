"""
lensforge - phase-center driven design of dielectric lens antennas.
Locates a radiator's phase center, synthesizes an extended hemispherical lens
and finds the air gap that maximizes boresight gain. Runs 100% locally.
"""

__version__ = "0.1.0"
