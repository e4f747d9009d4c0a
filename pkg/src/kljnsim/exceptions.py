"""Error types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid configuration value or malformed config file."""


class ShapeMismatchError(ValueError):
    """Waveforms or signal bundles with incompatible length or sample rate."""


class InferenceError(RuntimeError):
    """Resistance inference attempted on degenerate measurement data."""
