"""Interpolated quantum polar / quantum Reed-Muller CSS codes.

Construction of alpha-interpolated CSS codes for Pauli channels, validity
checks, successive-cancellation list decoding with coset aggregation, and
Monte Carlo logical error rate estimation.
"""

__version__ = "0.1.0"
