""" RACTC constants shared by the command line scripts and the pipeline stages """

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA_ERROR = 2
EXIT_NUMERIC_ERROR = 3

# Response fields for the JSON error contract
RESPONSE_FIELD_STATUS = 'status'
RESPONSE_FIELD_TYPE = 'type'
RESPONSE_FIELD_MESSAGE = 'message'
STATUS_ERROR = 'Error'

# Input file names written by the synthetic-city generator
FILENAME_REGIONS = 'regions.csv'
FILENAME_ATTRIBUTES = 'attributes.csv'
FILENAME_ATTRIBUTE_VOCAB = 'attribute_vocab.csv'
FILENAME_TRIPS = 'trips.csv'
FILENAME_GROUND_TRUTH = 'ground_truth_intensity.csv'

# Prepared artifacts
PREPARED_SUBFOLDER = 'prepared'
FILENAME_OD_SERIES = 'od_series.npz'
FILENAME_CLUSTER_LABELS = 'cluster_labels.csv'
FILENAME_COMPETITION_MATRIX = 'competition_matrix.csv'
FILENAME_POPULATION_LEVELS = 'population_levels.csv'
FILENAME_SPLIT = 'split.json'
FILENAME_PREPARE_MANIFEST = 'prepare_manifest.json'

# Training and evaluation artifacts
TRAIN_SUBFOLDER = 'train'
FILENAME_CHECKPOINT = 'checkpoint.zip'
FILENAME_HISTORY = 'history.csv'
FILENAME_ATTENTION_HISTORY = 'attention_history.csv'
FILENAME_RUN_MANIFEST = 'run_manifest.json'
FILENAME_ATTENTION_DUMP = 'attention.csv'
FILENAME_SWEEP = 'sweep.csv'
FILENAME_SWEEP_SUMMARY = 'sweep_summary.csv'
FILENAME_METRICS = 'metrics.json'
BASELINE_SUBFOLDER = 'baselines'
SWEEP_SUBFOLDER = 'sweep'

# CSV headers
HEADER_TRIPS = ['origin_id', 'dest_id', 'timestamp']
HEADER_REGIONS = ['id', 'lat', 'lon', 'population']
HEADER_ATTRIBUTES = ['region_id', 'attribute_id']
HEADER_ATTRIBUTE_VOCAB = ['attribute_id', 'name']
HEADER_GROUND_TRUTH = ['weekday', 'hour', 'origin_id', 'dest_id', 'intensity']
HEADER_CLUSTER_LABELS = ['region_id', 'cluster_id']
HEADER_POPULATION_LEVELS = ['region_id', 'population', 'level']
HEADER_HISTORY = ['epoch', 'train_loss', 'val_rmse', 'val_mae', 'val_smape', 'val_pcc']
HEADER_ATTENTION_HISTORY = ['epoch', 'hour', 'attribute_id', 'weight']
HEADER_ATTENTION_DUMP = ['hour', 'attribute_id', 'attribute_name', 'weight']
HEADER_SWEEP = ['param', 'value', 'seed', 'rmse', 'mae', 'smape', 'pcc']
HEADER_SWEEP_SUMMARY = ['param', 'value', 'seeds', 'rmse', 'mae', 'smape', 'pcc']
