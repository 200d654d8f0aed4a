"""Promptable segmentation at desk scale: model, data, metrics, training, service.

BLAS thread pools are pinned to one thread on import: every matrix in
the mini model is small enough that OpenBLAS threading costs far more
in synchronization than it buys (measured ~2.4x slower with 2
threads).  Set PROMPTSEG_BLAS_THREADS to override.
"""

import os

__version__ = "0.1.0"

try:
    import threadpoolctl

    threadpoolctl.threadpool_limits(limits=int(os.environ.get("PROMPTSEG_BLAS_THREADS", "1")))
except Exception:  # threadpoolctl missing or unsupported BLAS: run as-is
    pass
