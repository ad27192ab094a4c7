"""Reference-free summarization scoring, judging, and refinement toolkit."""

__version__ = "0.1.0"
