"""Exactly mergeable summaries: summarize partitions independently, merge without loss."""

__version__ = "1.0.0"
