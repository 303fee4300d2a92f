class ConfigError(Exception):
    """Invalid experiment configuration: unknown names, duplicate ids, bad values."""
