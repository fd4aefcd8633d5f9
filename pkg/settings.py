'''
Settings for the RACTC OD demand forecasting scripts
'''
import os


# Default output directory for prepared artifacts, checkpoints and reports, relative to the
# working directory unless absolute
output_dir = 'output'

# Timezone used to bucketize timestamps into hours of the day
timezone = 'UTC'

# Verbosity: 0 = quiet, 1 = stage summaries, 2 = per-epoch detail, 3 = per-batch detail
verbosity = 1

# Root seed used when neither the config file nor the command line sets one
seed = 0

# Set RACTC_SLOW_TESTS=1 to run the long acceptance tests
slow_tests = os.environ.get('RACTC_SLOW_TESTS', '') == '1'
