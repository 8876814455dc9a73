"""provsem: provenance events -> sentences -> embeddings -> few-shot detection."""

__version__ = "0.1.0"
