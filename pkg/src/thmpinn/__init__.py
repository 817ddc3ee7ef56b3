"""PINN solver for coupled thermo-hydro-mechanical processes in porous media."""

__version__ = "0.1.0"
