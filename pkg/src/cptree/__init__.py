"""Tree-LSTM composition functions over constituency trees, including
canonical-decomposition cells with shared input factors."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
