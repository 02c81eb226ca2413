import os

from dotenv import load_dotenv

load_dotenv()

# Defaults
APP_TITLE = 'Ensemble Autotuner'
APP_VERSION = '1.0.0'

RESULTS_FILE_NAME = 'results.csv'
TRACE_FILE_NAME = 'trace.csv'
EVALS_DIR_NAME = 'evals'

# Environment Variables
LOG_LEVEL = os.getenv('TUNER_LOG_LEVEL', 'INFO')
LOG_SERIALIZE = os.getenv('TUNER_LOG_SERIALIZE', 'false').lower() in ('1', 'true', 'yes')
LOG_FILE = os.getenv('TUNER_LOG_FILE')

DEFAULT_KAPPA = float(os.getenv('TUNER_DEFAULT_KAPPA', '1.96'))
DEFAULT_N_TREES = int(os.getenv('TUNER_DEFAULT_N_TREES', '50'))
DEFAULT_MIN_SAMPLES_SPLIT = int(os.getenv('TUNER_DEFAULT_MIN_SAMPLES_SPLIT', '2'))
DEFAULT_CANDIDATE_POOL_SIZE = int(os.getenv('TUNER_DEFAULT_CANDIDATE_POOL_SIZE', '1000'))
DEFAULT_MAX_EVALS = int(os.getenv('TUNER_DEFAULT_MAX_EVALS', '256'))
DEFAULT_N_WORKERS = int(os.getenv('TUNER_DEFAULT_N_WORKERS', '1'))
DEFAULT_SEED = int(os.getenv('TUNER_DEFAULT_SEED', '1234'))
DEFAULT_MAX_PENALTY = float(os.getenv('TUNER_DEFAULT_MAX_PENALTY', '-1.0'))
DEFAULT_KILL_GRACE_SEC = float(os.getenv('TUNER_DEFAULT_KILL_GRACE_SEC', '0.5'))
DEFAULT_SAMPLE_RETRIES = int(os.getenv('TUNER_DEFAULT_SAMPLE_RETRIES', '100'))
DEFAULT_BASELINE_REPEATS = int(os.getenv('TUNER_DEFAULT_BASELINE_REPEATS', '5'))
DEFAULT_LAUNCHER = os.getenv('TUNER_DEFAULT_LAUNCHER', 'srun')
# per-run limit for baseline measurements of campaigns that do not set eval_timeout yet
DEFAULT_BASELINE_TIMEOUT = float(os.getenv('TUNER_DEFAULT_BASELINE_TIMEOUT', '3600'))
