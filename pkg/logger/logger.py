import logging
import os
import sys


from config.config import DEBUG_FOLDER, DEFAULT_LOG_LEVEL, FORCE_DEFAULT_LOG_LEVEL_FOR_WHOLE_PROGRAM


class Logger:
    """
    Thin wrapper around the stdlib logger.

    Every module creates its own instance with `Logger(logger_name=__name__)`.
    Messages go to the console and to debug_logs/<logger_name>.log.

    Args:
        logger_name (str): Name of the logger, normally the module's __name__.
        log_level (int): Level for this logger. Ignored when
            FORCE_DEFAULT_LOG_LEVEL_FOR_WHOLE_PROGRAM is set in config.yaml.
        stacklevel (int): Passed to the stdlib logger so records point at the caller,
            not at this wrapper.

    Example:
    >>> logger = Logger(logger_name=__name__)
    >>> logger.info("Step 1. Generate the chirp", f=True)
    """

    def __init__(self,
                 logger_name: str = __name__,
                 log_level: int = DEFAULT_LOG_LEVEL,
                 stacklevel: int = 2,
                 ) -> None:
        self.logger_name = logger_name
        self.log_level = DEFAULT_LOG_LEVEL if FORCE_DEFAULT_LOG_LEVEL_FOR_WHOLE_PROGRAM else log_level
        self.stacklevel = stacklevel
        self.logger = logging.getLogger(logger_name)
        self.logger.setLevel(self.log_level)
        self.logger.propagate = False

        # Handlers are attached once per logger name.
        if not self.logger.handlers:
            formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")

            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setLevel(self.log_level)
            console_handler.setFormatter(formatter)
            self.logger.addHandler(console_handler)

            try:
                os.makedirs(DEBUG_FOLDER, exist_ok=True)
                file_handler = logging.FileHandler(
                    os.path.join(DEBUG_FOLDER, f"{logger_name}.log"), encoding="utf-8", delay=True
                )
                file_handler.setLevel(logging.DEBUG)
                file_handler.setFormatter(formatter)
                self.logger.addHandler(file_handler)
            except OSError as e:
                self.logger.warning(f"Could not attach file handler for '{logger_name}': {e}")

    def _log(self, level: int, message: str, f: bool = False, **kwargs) -> None:
        if f:
            print(message)
        self.logger.log(level, message, stacklevel=self.stacklevel + 1, **kwargs)

    def debug(self, message: str, f: bool = False) -> None:
        self._log(logging.DEBUG, message, f=f)

    def info(self, message: str, f: bool = False) -> None:
        self._log(logging.INFO, message, f=f)

    def warning(self, message: str, f: bool = False) -> None:
        self._log(logging.WARNING, message, f=f)

    def error(self, message: str, f: bool = False) -> None:
        self._log(logging.ERROR, message, f=f)

    def exception(self, message: str, f: bool = False) -> None:
        self._log(logging.ERROR, message, f=f, exc_info=True)

    def critical(self, message: str, f: bool = False) -> None:
        self._log(logging.CRITICAL, message, f=f)
