"""Environment configuration, loaded from the process environment and an optional .env file."""

import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    # Logging
    LOG_LEVEL = os.getenv("COOP_SAMPLING_LOG_LEVEL", "INFO")
    LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Output
    OUT_DIR = os.getenv("COOP_SAMPLING_OUT_DIR", "results")
    FLOAT_FORMAT = os.getenv("COOP_SAMPLING_FLOAT_FORMAT", "%.6f")

    # Thread pool size for `compare` cells
    WORKERS = int(os.getenv("COOP_SAMPLING_WORKERS", "1"))
