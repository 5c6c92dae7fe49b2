import logging
import sys

from abscheck.config import settings

_ROOT = "abscheck"
_configured = False


def _configure():
    global _configured
    if _configured:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    root = logging.getLogger(_ROOT)
    root.addHandler(handler)
    root.setLevel(settings.LOG_LEVEL.upper())
    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Logger under the package namespace, e.g. get_logger("engine") -> [abscheck.engine]."""
    _configure()
    short = name.rsplit(".", 1)[-1]
    return logging.getLogger(f"{_ROOT}.{short}")


def set_verbosity(level: int):
    """0 keeps the configured level, 1 -> INFO, 2+ -> DEBUG."""
    _configure()
    if level >= 2:
        logging.getLogger(_ROOT).setLevel(logging.DEBUG)
    elif level == 1:
        logging.getLogger(_ROOT).setLevel(logging.INFO)
