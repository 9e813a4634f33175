from functools import wraps
import time
from typing import Any, Callable


from logger.logger import Logger


def get_exec_time(func: Callable) -> Callable:
    """
    Decorator that logs how long a function takes to execute.

    Examples:
    >>> @get_exec_time
    >>> def sweep(self):
    >>>     ...
    >>> sweep()
    INFO:steps.monte_carlo_sweep:Total execution time for 'sweep': 41.2 s
    """
    @wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        logger = Logger(logger_name=func.__module__)
        begin = time.perf_counter()

        result = func(*args, **kwargs)

        logger.info(f"Total execution time for '{func.__name__}': {time.perf_counter() - begin:.3f} s")
        return result
    return wrapper
