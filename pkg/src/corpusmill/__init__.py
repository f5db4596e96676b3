"""corpusmill: corpus curation, mixing/packing, schedule planning and judge-based eval."""

__version__ = "0.1.0"
