class InputError(ValueError):
    """Bad user input or configuration; the CLI maps it to exit code 2."""
