"""Error taxonomy mapped to CLI exit codes (config 2, manifest 3, numeric 4)."""


class ConfigError(ValueError):
    """Invalid, unknown, or out-of-range configuration."""


class ManifestError(ValueError):
    """Unreadable or invalid benchmark manifest or referenced frame data."""
