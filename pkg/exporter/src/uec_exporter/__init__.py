"""Sentence-embedding exporter: UECS stores and labeled pair files."""

from .encoders import HashNgramEncoder, SentenceTransformerEncoder, resolve_encoder
from .errors import EncoderError, ExporterError, JobError
from .export import encode_job, export_pairs, export_store
from .job import ExportJob

__version__ = "0.1.0"

__all__ = [
    "EncoderError",
    "ExportJob",
    "ExporterError",
    "HashNgramEncoder",
    "JobError",
    "SentenceTransformerEncoder",
    "encode_job",
    "export_pairs",
    "export_store",
    "resolve_encoder",
    "__version__",
]
