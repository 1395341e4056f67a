"""defminer: mine, filter, and statistically analyze term definitions
from document corpora."""

__version__ = "0.1.0"
