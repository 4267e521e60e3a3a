"""Constants for the primerace command-line tools"""

# Process exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INCONCLUSIVE = 5

# Default for --threads
THREADS_ENV = 'PRIMERACE_THREADS'

# Argument destinations left out of the configuration hash
UNHASHED_ARGS = ('func', 'output', 'verbose', 'config', 'threads', 'plot')
