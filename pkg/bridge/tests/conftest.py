import sys
from pathlib import Path

# make the fixture predictor library importable for pickling round-trips
sys.path.insert(0, str(Path(__file__).parent / "fixtures"))
