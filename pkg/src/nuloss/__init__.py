"""Numerical laboratory for the loss-of-regularity behaviour of
u_tt + b^2(t) (i d/dx + a(x))^2 u = 0 with an oscillating time coefficient.

Modules
-------
exprlang        expression language for a(x), b(t), nu(t) with symbolic derivatives
spectral        eigenbasis of the 1-D magnetic operator, generalized Fourier transform
coeffs          time-coefficient profiles, assumption checks, separating time
zones           phase-space zone decomposition, micro-energies, symbol estimator
modesolve       single-mode solvers: adaptive RK, time-ordered series, two-step WKB
energy          homogeneous Sobolev energies and the global estimate sweep
counterexample  sharpness family: calibrated bump, Floquet window, blow-up table
cli             config-driven command line driver
"""

__version__ = "0.1.0"
