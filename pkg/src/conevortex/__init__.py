"""Abelian vortices with Kähler-cone targets on a flat torus.

Solves the Kazdan-Warner reduction of the gauge-fixing problem, builds
tau-vortices and symplectic vortices into C^n, and extracts the divisor of a
solution from the zeros of its moment map.
"""

__version__ = "0.1.0"
