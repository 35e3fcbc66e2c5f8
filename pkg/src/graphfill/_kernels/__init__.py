"""Kernel backend selection: compiled extension when available, numpy otherwise."""

from . import _numpy

try:
    from . import _ext as _impl

    HAVE_COMPILED = True
except ImportError:
    _impl = _numpy
    HAVE_COMPILED = False

csr_spmm = _impl.csr_spmm
nonedge_scan = _impl.nonedge_scan


def backend_name():
    return "compiled" if HAVE_COMPILED else "numpy"
