"""Compiled kernels.  Built from ``.pyx`` sources when Cython is available;
:mod:`conslr.stencils` falls back to NumPy when they are not."""
