LOGGER_SERVICE_NAME = 'ensemble-autotuner'  # Identifies log lines from this tool when several campaigns log to one collector.

INACTIVE_LITERAL = 'nan'
INACTIVE_SENTINEL = -1.0

TIMEOUT_FACTOR = 1.5
# share of the worst ok objective a default-penalized result is pushed beyond it
FAILURE_MARGIN = 0.5

RECORD_COLUMNS = ('objective', 'status', 'elapsed_sec', 'worker_id', 'eval_id', 'started_at', 'finished_at')
TRACE_COLUMNS = ('t_sec', 'objective', 'status')
BASELINE_TRACE_STATUS = 'baseline'

SYNTHETIC_PREFIX = 'synthetic:'
MOLD_EVALUATOR = 'mold'
