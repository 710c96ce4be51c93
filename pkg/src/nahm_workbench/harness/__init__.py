"""Configuration, experiment registry, result records and the command line."""

from .config import ConfigError, ExperimentConfig, content_hash, load_config, parse_config
from .experiments import REGISTRY, Measurement, MissingCacheError
from .runner import ResultRecord, RecordError, format_table, read_record, report, run_experiment, write_record
