"""algoc: optimal control on almost Lie algebroids"""

__version__ = "0.1.0"
