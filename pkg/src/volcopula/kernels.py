"""Backend selection for the hot loops.

The compiled extension is used when it was built; setting the environment
variable ``VOLCOPULA_PURE_PYTHON=1`` before import forces the numpy
fallback.  Both backends return identical integer results; the float
aggregates agree to rounding.
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("VOLCOPULA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"


def backends():
    """Mapping of available backend names to kernel modules."""
    out = {"python": _fallback}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out


def chain_signs(prices, seed_sign=1, impl=None):
    """Tick-rule signs for a price stream, the first trade taking ``seed_sign``."""
    impl = impl or _impl
    return impl.chain_signs(np.ascontiguousarray(prices, dtype=np.float64), int(seed_sign))


def bucket_stats(keys, x, impl=None):
    """Per-run sum, mean absolute deviation, mean squared deviation and count.

    ``keys`` must be sorted so equal keys are contiguous.
    """
    impl = impl or _impl
    return impl.bucket_stats(np.ascontiguousarray(keys, dtype=np.int64),
                             np.ascontiguousarray(x, dtype=np.float64))


def _as_bin_index(a):
    return np.ascontiguousarray(a, dtype=np.int16)


def _as_mask(m):
    return None if m is None else np.ascontiguousarray(m, dtype=np.uint8)


def pair_counts(ia, ib, bins, keep=None, impl=None):
    impl = impl or _impl
    return impl.pair_counts(_as_bin_index(ia), _as_bin_index(ib), _as_mask(keep), int(bins))


def pair_counts_batch(idx, bins, keep_first=None, keep_second=None, impl=None):
    """Counts for every pair k < l of the rows of ``idx``, in row-major pair order."""
    impl = impl or _impl
    if (keep_first is None) != (keep_second is None):
        raise ValueError("keep_first and keep_second must be given together")
    return impl.pair_counts_batch(_as_bin_index(idx), _as_mask(keep_first),
                                  _as_mask(keep_second), int(bins))
