"""Secrecy-rate optimization for an active-RIS-assisted radar-communication system.

The package pairs a ground-truth system model (channels, rates, echo SINR,
power accounting) with an alternating optimizer that designs the base-station
precoder and the reflecting coefficients through semidefinite relaxation and
minorize-maximize surrogates, plus an experiment harness and CLI for
scheme-comparison sweeps at desk scale.
"""

__version__ = "0.1.0"
