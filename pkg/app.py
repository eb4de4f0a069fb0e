"""
Command-line entry point for the sampling-based data-driven predictive controller.

Usage:
    python app.py collect  --config configs/dcdc_converter.toml --out data/dcdc.csv
    python app.py offline  --config configs/dcdc_converter.toml --data data/dcdc.csv --out out/bundle.json
    python app.py simulate --config configs/dcdc_converter.toml --bundle out/bundle.json --out out/sim
    python app.py openloop --config configs/dcdc_converter.toml --data data/dcdc.csv --out out/openloop
"""

import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
