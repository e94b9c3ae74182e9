"""
Runtime settings for the MPPT lab, read from the environment (.env supported)
"""

import logging
import os

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'fixtures')
SEED_PARAMS_FILE = os.path.join(FIXTURE_DIR, 'kc200gt_seed.json')

# Model and harness
PARAMS_FILE = os.getenv('MPPT_PARAMS_FILE', '')
TARGET_PMAX = float(os.getenv('MPPT_TARGET_PMAX', 217.54))
MAX_ITERATIONS = int(os.getenv('MPPT_MAX_ITERATIONS', 20000))
ORACLE_V_TOL = float(os.getenv('MPPT_ORACLE_V_TOL', 1e-6))
TABLE_WORKERS = int(os.getenv('MPPT_TABLE_WORKERS', 4))

# HTTP surface
CORS_ORIGINS = os.getenv('CORS_ORIGINS', '*')
HOST = os.getenv('HOST', '0.0.0.0')
PORT = int(os.getenv('PORT', 5001))
FLASK_DEBUG = os.getenv('FLASK_DEBUG', 'False').lower() in ('1', 'true', 'yes')

LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING').upper()
LOG_FORMAT = '[%(levelname)s] %(name)s: %(message)s'


def configure_logging(level=None):
    """Install the tagged console format on the root logger"""
    logging.basicConfig(level=level or LOG_LEVEL, format=LOG_FORMAT, force=True)
