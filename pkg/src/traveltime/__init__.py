"""Minimally-congested car travel times from open road data.

Speed-limit shortest paths give a naive baseline; a random forest trained on
route-level control and turn counts corrects it toward reference times.
"""

__version__ = "0.1.0"
