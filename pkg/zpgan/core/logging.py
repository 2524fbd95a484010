# zpgan/core/logging.py
import logging

LOGGER_NAME = "zpgan"
_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def configure_logging(level: str = "INFO") -> logging.Logger:
    """Attach a single stream handler to the package logger; safe to call repeatedly."""
    logger = logging.getLogger(LOGGER_NAME)
    if not any(getattr(h, "_zpgan", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        handler._zpgan = True  # marks our handler so reconfiguring doesn't stack them
        logger.addHandler(handler)
    logger.setLevel(level.upper())
    return logger
