import os


def make_output_directory(path: str) -> str:
    """Create `path` (and parents) if needed and return it as an absolute path."""
    path = os.path.abspath(path)
    if os.path.exists(path) and not os.path.isdir(path):
        raise NotADirectoryError(f"Output path {path} exists and is not a directory")
    os.makedirs(path, exist_ok=True)
    return path
