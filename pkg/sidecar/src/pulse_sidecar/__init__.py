"""NDJSON-over-stdio model server for the drug-opinion pipeline."""

__version__ = "0.1.0"
