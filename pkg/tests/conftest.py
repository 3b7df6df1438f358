#!/usr/bin/env python3

import pytest
import os
import sys
import logging
from pathlib import Path
from dotenv import load_dotenv

# Add src to sys.path so the package imports without installation
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

# Configure logging for tests
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)

# Load environment variables from .env file
load_dotenv()


# Register marks for pytest
def pytest_configure(config):
    """Register custom pytest markers."""
    config.addinivalue_line("markers", "slow: acceptance-scale randomized sweeps")
    config.addinivalue_line("markers", "integration: end-to-end runs of the command line")


def pytest_runtest_setup(item):
    """Skip tests marked 'slow' when SKIP_SLOW_TESTS is set."""
    if "slow" in item.keywords:
        if os.environ.get("SKIP_SLOW_TESTS", "").lower() in ("true", "1", "yes"):
            pytest.skip("Slow tests skipped via SKIP_SLOW_TESTS environment variable")
