from pathlib import Path

DEFAULT_FIXTURES_DIR = Path(__file__).parent / "fixtures"
SCENARIO_GLOB = "*.json"
SIGNIFICANT_DIGITS = 12
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
