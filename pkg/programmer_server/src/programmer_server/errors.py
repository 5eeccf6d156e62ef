class DataError(Exception):
    """A training or dev file violates the expected schema."""
