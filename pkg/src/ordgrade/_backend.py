"""Select the kernel backend at import.

The compiled extension is preferred. Setting ``ORDGRADE_PURE_PYTHON=1``
forces the numpy fallback, which is also used when the extension was not
built.
"""

import os

if os.environ.get("ORDGRADE_PURE_PYTHON") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = "compiled" if kernels.__name__.endswith("._kernels") else "python"

__all__ = ["kernels", "BACKEND"]
