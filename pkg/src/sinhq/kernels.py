"""Hot-loop dispatch: compiled extension when built, numpy fallback otherwise.

Set ``SINHQ_PURE_PYTHON=1`` to force the fallback.  The exponential kernels
stay on numpy even when the extension is present: numpy's vectorised exp
beats the scalar libm loop (see benchmarks/bench_kernels.py), while the
stencil Laplacian gains 8-16x from the compiled loop.
"""
import os

from ._kernels_py import cosh_force, exp_pair, laplacian  # noqa: F401

BACKEND = "python"
if os.environ.get("SINHQ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import laplacian  # noqa: F401,F811
        BACKEND = "cython"
    except ImportError:
        pass
