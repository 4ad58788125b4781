"""FastAPI service wrapping the codec."""
