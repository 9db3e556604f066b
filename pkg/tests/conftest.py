import sys
from pathlib import Path

# Allow running pytest without installing the package first.
src = Path(__file__).resolve().parent.parent / "src"
if str(src) not in sys.path:
    sys.path.insert(0, str(src))
