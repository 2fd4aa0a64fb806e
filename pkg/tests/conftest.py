import sys
from pathlib import Path

# make tests/ importable for the shared oracle helpers
sys.path.insert(0, str(Path(__file__).parent))
