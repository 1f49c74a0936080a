"""Pick the compiled kernels when available.

Set ``HAWKESGC_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
excitation_features = _fallback.excitation_features
sine_intensity = _fallback.sine_intensity

if os.environ.get("HAWKESGC_PURE_PYTHON") != "1":
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        excitation_features = _kernels.excitation_features
        sine_intensity = _kernels.sine_intensity
