"""Kernel backend selection.

The compiled Cython core is preferred when it imported cleanly; otherwise
the numpy implementation takes over. TEXTERASER_BACKEND=numpy|cython forces
a choice (cython raises if the extension is unavailable). Both backends
share one contract, so everything above this package is backend-agnostic.
"""

import os

_choice = os.environ.get("TEXTERASER_BACKEND", "auto").lower()

if _choice not in ("auto", "cython", "numpy"):
    raise RuntimeError(
        f"TEXTERASER_BACKEND must be auto, cython, or numpy, got {_choice!r}")

if _choice == "numpy":
    from . import _npkernels as _impl
    BACKEND = "numpy"
else:
    try:
        from . import _cykernels as _impl
        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        from . import _npkernels as _impl
        BACKEND = "numpy"

conv_fwd = _impl.conv_fwd
conv_bwd = _impl.conv_bwd
deconv_fwd = _impl.deconv_fwd
deconv_bwd = _impl.deconv_bwd


def get_backend(name: str):
    """Return the kernel module for an explicit backend name (for benchmarks)."""
    if name == "numpy":
        from . import _npkernels
        return _npkernels
    if name == "cython":
        from . import _cykernels
        return _cykernels
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name):
    """Rebind the exported kernels to one backend; None restores the default.

    Callers above this package resolve kernels at call time, so the switch
    takes effect immediately. Meant for benchmarks and backend-parity tests.
    """
    global conv_fwd, conv_bwd, deconv_fwd, deconv_bwd
    impl = _impl if name is None else get_backend(name)
    conv_fwd = impl.conv_fwd
    conv_bwd = impl.conv_bwd
    deconv_fwd = impl.deconv_fwd
    deconv_bwd = impl.deconv_bwd
