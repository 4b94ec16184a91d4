"""Traveling waves of scalar viscous balance laws u_t + f(u)_x = u_xx + g(u).

Computes the pulse and both periodic families of the profile ODE and checks
their spectral instability with Hill's method and Evans functions.
"""

__version__ = "0.1.0"
