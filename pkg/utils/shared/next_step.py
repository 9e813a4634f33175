import re


from logger.logger import Logger
logger = Logger(logger_name=__name__, log_level=20)


STEP_PATTERN = re.compile(r'^Step (\d+)', flags=re.IGNORECASE)


def next_step(message: str, step: int = None, stop: bool = False) -> None:
    """
    Announce a pipeline step on stdout. With stop=True, ask before continuing.

    Example:
    >>> next_step("Step 2. Run the Monte Carlo sweep.")
    """
    match = STEP_PATTERN.match(message)
    if match:
        step = int(match.group(1))

    if stop:
        asterisks = '*' * len(message)
        prompt = f"Continue to Step {step}? y/n: " if step else "Continue to next step? y/n: "
        if input(f"{asterisks}\n{message}\n{asterisks}\n{prompt}") != "y":
            where = f"before Step {step}" if step else "at a step"
            raise KeyboardInterrupt(f"twtt simulation stopped {where}.")

    logger.info(message, f=True)
