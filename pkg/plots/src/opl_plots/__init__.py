"""Figure rendering for the factored-OPL benchmark results CSV."""
from .figures import FAMILIES, RenderResult, load_results, render, render_all

__version__ = "0.1.0"
