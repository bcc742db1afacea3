"""Weirdness-based temporal drift monitoring for timestamped comment corpora."""

from .errors import InputError
from .ingest import CommentRecord, KeywordList, Label, MonthKey

__all__ = ["CommentRecord", "InputError", "KeywordList", "Label", "MonthKey"]
__version__ = "0.1.0"
