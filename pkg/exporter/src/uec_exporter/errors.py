"""Exporter error hierarchy."""


class ExporterError(Exception):
    """Base class for all exporter failures."""


class JobError(ExporterError):
    """Invalid export job description."""


class EncoderError(ExporterError):
    """Encoder could not be loaded or a text could not be encoded."""
