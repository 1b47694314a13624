from pathlib import Path

__version__ = "0.1"

dir = Path(__file__).parent
