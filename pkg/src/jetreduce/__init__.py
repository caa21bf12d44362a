"""Exact Hamiltonian and Lagrangian reductions of evolution PDEs on the
stationary manifolds of scaling symmetries, with numeric Painleve and
n-waves companions."""

__version__ = "0.1.0"
