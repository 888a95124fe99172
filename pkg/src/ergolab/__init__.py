"""Numerical laboratory for expanding semigroup actions and contracting IFS.

The package splits into the geometric substrate (`geometry`, `maps`), the
expansion side (`certificates`, `minimality`), the contraction side
(`blending`, `ifs`), statistical diagnostics (`ergodicity`), and the
command-line front end (`cli`).
"""

__version__ = "0.1.0"

__all__ = [
    "geometry",
    "maps",
    "certificates",
    "blending",
    "minimality",
    "ifs",
    "ergodicity",
    "cli",
]
