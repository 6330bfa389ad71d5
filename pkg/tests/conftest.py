import sys
from pathlib import Path

# allow cross-test imports of shared fixtures (tests/ is not a package)
sys.path.insert(0, str(Path(__file__).parent))
