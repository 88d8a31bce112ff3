"""Parser for the ``name:key=value,key=value`` spec strings used by the CLI."""

from .errors import ConfigError


def split_spec(text):
    """Split ``"annulus:r=0.5"`` into ``("annulus", {"r": "0.5"})``.

    Values are returned as stripped strings; callers convert them.
    """
    text = text.strip()
    if not text:
        raise ConfigError("empty spec string")
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    params = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            key = key.strip().lower()
            if not eq or not key or not value.strip():
                raise ConfigError(f"malformed parameter {item.strip()!r} in {text!r}")
            if key in params:
                raise ConfigError(f"duplicate parameter {key!r} in {text!r}")
            params[key] = value.strip()
    return name, params


def parse_real(value, what):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{what}: expected a real number, got {value!r}") from None


def parse_int(value, what):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {value!r}") from None


def parse_complex(value, what):
    """Accept ``0.3``, ``0.3+0i``, ``-0.2i``, ``0.1-0.4j``."""
    text = value.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(text)
    except ValueError:
        raise ConfigError(f"{what}: expected a complex number, got {value!r}") from None


def reject_unknown(params, allowed, text):
    extra = sorted(set(params) - set(allowed))
    if extra:
        raise ConfigError(f"unknown parameter(s) {extra} in {text!r}; allowed: {sorted(allowed)}")
