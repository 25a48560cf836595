import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


@dataclass
class Config:
    """Configuration settings for the geometric control toolkit"""

    # Probe settings
    SEED: int = int(os.getenv("GEOCONTROL_SEED", "20240517"))
    PROBE_COUNT: int = 5  # Random points used to cross-check a zero test
    PROBE_RETRIES: int = 8  # Fresh points drawn before PoleAtPoint is raised
    RANK_POINTS: int = 3  # Points over which numeric ranks are maximised
    SYMBOLIC_RANK_BUDGET: int = 120  # Matrix entries above which ranks are numeric only

    # Search settings
    DEGREE_BUDGET: int = int(os.getenv("GEOCONTROL_DEGREE_BUDGET", "4"))
    MODE: str = os.getenv("GEOCONTROL_MODE", "exact")  # Prolongation plan: "exact" or "bound"

    # Reporting
    SCHEMA_VERSION: str = "1.0"
    LOG_LEVEL: str = os.getenv("GEOCONTROL_LOG_LEVEL", "WARNING")

    # Fixture corpus location
    CORPUS_PATH: str = os.getenv("GEOCONTROL_CORPUS", "./corpus")


config = Config()
