"""attnflow: keyword-attention indices, VAR estimation, and norm-game dynamics.

From dated document collections to per-period mention counts and shares
(:mod:`attnflow.corpus`), to normalized attention indices
(:mod:`attnflow.index`), to a VAR over the resulting panel with full OLS
inference (:mod:`attnflow.var`), linked to a linear-quadratic
norm-transmission game (:mod:`attnflow.normgame`).
"""

from . import corpus, index, kernels, normgame, periods, var

__version__ = "0.1.0"

__all__ = ["corpus", "index", "kernels", "normgame", "periods", "var", "__version__"]
