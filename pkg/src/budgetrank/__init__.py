"""budgetrank: identify budget-relevant economic sectors in transcript
excerpts and rank them by predicted next-day market performance.

Subpackages select a compiled kernel backend when the extension is built;
``budgetrank._kernels.BACKEND`` names the active one.
"""

from ._kernels import BACKEND

__all__ = ["BACKEND", "__version__"]

__version__ = "0.1.0"
