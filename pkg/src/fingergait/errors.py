"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration input."""


class SetupError(RuntimeError):
    """A run precondition failed (e.g. the root grasp is not stable)."""


class SamplerError(RuntimeError):
    """A rejection sampler exhausted its attempt budget."""
