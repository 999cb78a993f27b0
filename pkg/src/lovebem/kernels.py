"""Backend selection for the pair-kernel hot path.

Importing this module picks the compiled extension when it was built and
falls back to the pure numpy implementation otherwise; both export the
same two functions with identical semantics.  HAS_COMPILED records which
one is active so benchmarks and tests can compare the two directly.
"""

try:
    from . import _kernels as _impl

    HAS_COMPILED = True
except ImportError:
    from . import _kernels_np as _impl

    HAS_COMPILED = False

from . import _kernels_np

green_pair_moments = _impl.green_pair_moments
curl_pair_entries = _impl.curl_pair_entries


def set_num_threads(n):
    """Cap the compiled backend's thread count; the numpy path ignores it."""
    if HAS_COMPILED and hasattr(_impl, "set_num_threads"):
        _impl.set_num_threads(int(n))
