"""Exception type shared by every module.

Each error carries a short machine-readable ``code`` (e.g. ``"empty-dataset"``)
that callers and tests can match on.
"""


class QBDLError(ValueError):
    """Domain error with a stable string code."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)
