class DataError(ValueError):
    """Invalid input data: malformed files, broken invariants, mismatched universes.

    The CLI maps this to exit code 1; usage errors exit with 2.
    """
