"""Select the branch-and-bound kernel: compiled if available, else pure Python.

Set ``SEDSEARCH_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _bnb_py

python_bnb_search = _bnb_py.bnb_search

compiled_bnb_search = None
if not os.environ.get("SEDSEARCH_PURE_PYTHON"):
    try:
        from ._bnb import bnb_search as compiled_bnb_search
    except ImportError:  # extension not built
        compiled_bnb_search = None

if compiled_bnb_search is not None:
    bnb_search = compiled_bnb_search
    BACKEND = "cython"
else:
    bnb_search = python_bnb_search
    BACKEND = "python"
