# Kernel dependence network package
__version__ = '0.1.0'
