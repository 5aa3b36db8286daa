"""Single-excitation dynamics of chirally coupled emitter arrays with phase disorder."""

__version__ = "0.1.0"
