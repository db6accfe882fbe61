"""Hot numerical kernels, with a compiled core and a pure-numpy fallback.

The compiled extension (``_fast``, built from Cython) is preferred when it
imported cleanly; otherwise the numpy implementation in ``pure`` is used.
Set BUDGETRANK_PURE_KERNELS=1 to force the fallback (used by the benchmark
and the cross-backend tests).
"""

import os

if os.environ.get("BUDGETRANK_PURE_KERNELS") == "1":
    from . import pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import pure as _impl

        BACKEND = "pure"

cosine_softmax_loss = _impl.cosine_softmax_loss
cosine_softmax_grad = _impl.cosine_softmax_grad
best_split_sorted = _impl.best_split_sorted

__all__ = ["BACKEND", "cosine_softmax_loss", "cosine_softmax_grad", "best_split_sorted"]
