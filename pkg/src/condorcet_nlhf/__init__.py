"""Condorcet structure of majority preferences and Nash-equilibrium alignment.

Submodules: ``prefcore`` (profiles, matrices, samplers, BTL fitting),
``tournament`` (majority digraphs), ``nash`` (game solvers),
``montecarlo`` (impartial-culture estimates), ``nlhf`` (regularised game
and rejection-sampling training) and ``cli``.
"""

__version__ = "0.1.0"
