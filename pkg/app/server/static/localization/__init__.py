EXCEPTION_GENERIC_ERROR = 'Something went wrong'
EXCEPTION_SPACE_EXHAUSTED = 'space exhausted'
EXCEPTION_FILE_NOT_FOUND = 'File not found'
EXCEPTION_FILE_UNREADABLE = 'File could not be parsed'
EXCEPTION_MOLD_MISSING = 'Code mold is required when evaluator is "mold"'
EXCEPTION_METRIC_MISSING = 'Metric definition is required when evaluator is "mold"'
EXCEPTION_UNKNOWN_EVALUATOR = 'Unknown evaluator'
EXCEPTION_UNKNOWN_SYNTHETIC = 'Unknown synthetic objective'
EXCEPTION_UNKNOWN_PLACEHOLDER = 'Placeholder references an unknown parameter'
EXCEPTION_UNRESOLVED_PLACEHOLDER = 'Placeholder left unresolved after rendering'
EXCEPTION_STORE_WRITE = 'Could not write the results database'
EXCEPTION_RESULTS_EMPTY = 'Results file holds no evaluations'
EXCEPTION_RESULTS_HEADER = 'Results file header does not match the parameter space'
EXCEPTION_BASELINE_FAILED = 'Every baseline run failed or timed out'
EXCEPTION_CAMPAIGN_ABORTED = 'Campaign aborted'
EXCEPTION_RESULTS_EXIST = 'Results file already exists; pass --resume to continue it'
EXCEPTION_DIRECTION_MISSING = 'Pass --direction or --campaign to know which objective is best'
EXCEPTION_SYNTHETIC_SPACE = 'Synthetic objectives bring their own space; remove the space entry or make it match'
