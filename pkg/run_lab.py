"""
HJ lab - entry point
Run this file with a scenario: python run_lab.py run scenarios/burgers-shock.json
"""
import sys
from pathlib import Path

# Add src to path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

from hj_lab.main import app

if __name__ == "__main__":
    app()
