"""
Anomaly-based detection of network probing, from pcap to verdict.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("probewatch")
except PackageNotFoundError:
    __version__ = "0+unknown"

from probewatch.config import RunConfig
from probewatch.pipeline import Pipeline, load_model, read_table
