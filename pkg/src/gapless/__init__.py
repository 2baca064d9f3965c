"""Emergent gapless modes in truncated attractive-boson models.

Submodules: :mod:`fock` (Fock spaces and operators), :mod:`models` (term
lists), :mod:`cnumber` (c-number landscape), :mod:`bogoliubov` (quadratic
fluctuations), :mod:`dynamics` (exact diagonalisation and coherence times)
and :mod:`cli`.
"""

__version__ = "0.1.0"
