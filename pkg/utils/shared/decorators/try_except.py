"""
A decorator that wraps a function in a try-except block with optional retries and exception raising.

Unlike a bare `except Exception`, only the listed exception types are caught;
anything else propagates unchanged so programming errors are never swallowed.

Args:
    exception (list): Exception types to catch. Defaults to [TwttError].
    raise_exception (bool): If True, re-raise the caught exception once the retries are exhausted.
        If False, the wrapped call returns None instead. Defaults to False.
    retries (int): How many more times to call the function after a caught exception. Defaults to 0.
    logger (Logger): A logger instance. Defaults to a Logger named after the wrapped function's module.

Example:
>>> @try_except(exception=[NoDetectionError], retries=0)
>>> def trial(seed):
>>>     return run_exchange(cfg, seed)
>>> trial(3)
WARNING:steps.monte_carlo_sweep:NoDetectionError exception in 'trial'
correlation peak 201.3 is below the detection threshold 256
"""
from functools import wraps
from typing import Any, Callable, Optional


from logger.logger import Logger
from twtt.exceptions import TwttError


def try_except(exception: Optional[list[type[BaseException]]] = None,
               raise_exception: bool = False,
               retries: int = 0,
               logger: Optional[Logger] = None,
               ) -> Callable:
    exception_tuple = tuple(exception or [TwttError])
    retries = max(0, retries)

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            nonlocal logger
            logger = logger or Logger(logger_name=func.__module__, stacklevel=3)
            attempts = 0

            while True:
                try:
                    return func(*args, **kwargs)
                except exception_tuple as e:
                    error_message = f"{e.__class__.__name__} exception in '{func.__name__}'\n{e}"
                    if attempts < retries:
                        attempts += 1
                        logger.debug(f"{error_message}\nRetrying ({attempts}/{retries})...")
                        continue

                    if retries:
                        error_message += f"\nretries: {attempts}"
                    if raise_exception:
                        logger.error(error_message)
                        raise
                    logger.warning(error_message)
                    return None
        return wrapper
    return decorator
