"""Data-driven refinement of exposure-mapped renditions.

Consumes the renditions the stitcher CLI emits, learns the residual
between them and ground-truth targets, and writes refined renditions
back to the file contract the stitcher's --refined-dir accepts.
"""

__version__ = "0.1.0"
