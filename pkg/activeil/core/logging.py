"""
Logging setup (loguru)

Modules log with `from loguru import logger`; this module only decides
where the records go.
"""
import sys
from pathlib import Path
from typing import Optional

from loguru import logger

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


def setup_logging(level: str = "INFO", log_file: Optional[str] = None, serialize: bool = False) -> None:
    """
    Configure loguru sinks

    Args:
        level: minimum level for all sinks
        log_file: optional path of an extra file sink (rotated at 10 MB)
        serialize: write the file sink as JSON lines
    """
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=LOG_FORMAT, enqueue=False)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_file,
            level=level.upper(),
            rotation="10 MB",
            serialize=serialize,
            enqueue=True,
        )
