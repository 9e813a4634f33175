import os
from typing import Optional


import pandas as pd


from logger.logger import Logger


def _shortest_repr(value: float) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(value))


def save_list_of_dicts_to_csv_via_pandas(list_of_dicts: list[dict],
                                         filepath: str,
                                         columns: Optional[list[str]] = None,
                                         sep: str = ",",
                                         index: bool = False,
                                         return_df: bool = False,
                                         logger: Logger = None,
                                         ) -> Optional[pd.DataFrame]:
    """
    Save a list of dictionaries to a CSV file using a Pandas DataFrame.

    Floats are written with their shortest round-trip representation, UTF-8, LF line endings.

    Args:
        list_of_dicts (list[dict]): Rows to write.
        filepath (str): The filepath of the output CSV file.
        columns (list[str], optional): Column order. Defaults to the keys of the first row.
        sep (str, optional): Field separator. " " gives the whitespace-separated .dat layout.
        index (bool, optional): Whether to write the row index. Defaults to False.
        return_df (bool, optional): Also return the DataFrame that was saved.
        logger (Logger): Logger for the 'saved' message.

    Raises:
        ValueError: If the input is not a non-empty list of dictionaries.
        OSError: If the file cannot be written. The message names the path.

    Example:
    >>> rows = [{'bandwidth_hz': 36e6, 'length': 512}]
    >>> save_list_of_dicts_to_csv_via_pandas(rows, 'output/results.csv', logger=logger)
    """
    assert logger, "No logger provided."
    if not isinstance(list_of_dicts, list) or not list_of_dicts or not all(isinstance(row, dict) for row in list_of_dicts):
        error_message = f"list_of_dicts argument is not a non-empty list of dicts, but a {type(list_of_dicts)}"
        logger.error(error_message)
        raise ValueError(error_message)

    df = pd.DataFrame.from_records(list_of_dicts, columns=columns)
    try:
        df.to_csv(filepath, sep=sep, index=index, float_format=_shortest_repr, encoding="utf-8", lineterminator="\n")
    except OSError as e:
        logger.error(f"Could not write {filepath}: {e}")
        raise OSError(f"Could not write {filepath}: {e}") from e
    logger.info(f"{os.path.basename(filepath)} saved to {os.path.dirname(os.path.abspath(filepath))}.")

    if return_df:
        return df
    return None
