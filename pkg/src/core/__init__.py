"""Core numerical and symbolic kernels."""
