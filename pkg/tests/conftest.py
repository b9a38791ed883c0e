import sys
from pathlib import Path

# Allow running the tests straight from a checkout (the compiled kernels are
# optional; everything falls back to the numpy implementation).
_SRC = Path(__file__).resolve().parent.parent / "src"
if (_SRC / "lookahead_traffic").is_dir() and str(_SRC) not in sys.path:
    sys.path.insert(0, str(_SRC))
