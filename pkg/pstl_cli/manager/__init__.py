"""
A manager package processes the config parsed by the core parser,
running every stage of the pipeline from data generation through pretraining to evaluation.

The core principle of this package is that it should be the **only** object that reads and writes run artifacts,
accessing the relevant config objects as needed.
"""
from ._processor import PSTLProcessor
