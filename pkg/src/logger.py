import logging
import os
import traceback

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def get_logger(task_name: str, level: int = logging.INFO) -> logging.Logger:
    """
    Returns the console logger of a task (a study, the suite or the command
    line). Repeated calls return the same logger without stacking handlers.

    Args:
        task_name (str): Logger name, shown in every record.
        level (int): Level of the logger and its handler.

    Returns:
        logging.Logger: The configured logger.
    """
    logger = logging.getLogger(task_name)
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setLevel(level)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    return logger


def log_error(message: str, error: Exception, error_fpath: str) -> None:
    """
    Writes a failed run's error file: the message, the exception type, one
    line per invalid field when the error carries `field_errors`, and the
    traceback. An existing file of the same command is replaced.

    Args:
        message (str): What failed.
        error (Exception): The exception that ended the run.
        error_fpath (str): Path of the command's error file.
    """
    lines = [f"{message} Error: {error}", f"Type: {type(error).__name__}"]
    for path, reason in getattr(error, "field_errors", []):
        lines.append(f"  {path}: {reason}")
    trace = traceback.format_exception(type(error), error, error.__traceback__)

    os.makedirs(os.path.dirname(error_fpath), exist_ok=True)
    with open(error_fpath, "w", encoding="utf-8") as file:
        file.write("\n".join(lines) + "\n")
        file.write("".join(trace))


def log_diagnostic(
    logger: logging.Logger, name: str, value: float, limit: float
) -> bool:
    """
    Log an empirical quantity against a soft limit without raising.

    Quantities whose constants are not known a priori are reported this way:
    INFO when within the limit, WARNING otherwise.

    Args:
        logger (logging.Logger): Logger to write to.
        name (str): Human readable name of the quantity.
        value (float): Measured value.
        limit (float): Soft upper limit.

    Returns:
        bool: True if the value is within the limit.
    """
    within = bool(value <= limit)
    level = logging.INFO if within else logging.WARNING
    logger.log(level, f"{name} = {value:.6g} (soft limit {limit:.6g})")
    return within
