"""Shared test setup.

The BLAS thread pool is pinned to one thread before numpy loads: the
library's matrices are small enough that threading only adds overhead, and
single-threaded kernels keep timings stable under pytest.
"""

import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
