"""Exception taxonomy; the CLI maps these onto its exit-code contract."""


class CfstabError(Exception):
    """Base class for package errors."""


class ConfigError(CfstabError):
    """Bad or inconsistent configuration (CLI exit 2)."""


class DataError(CfstabError):
    """Dataset loading / shape problems (CLI exit 3)."""


class NumericError(CfstabError):
    """Numerical failure such as NaN loss during training (CLI exit 4)."""


class VerificationError(CfstabError):
    """A theorem verifier found a violation (CLI exit 5)."""


class DegenerateBoundaryError(CfstabError):
    """Boundary pair in the H1 == H2 regime; the point construction is undefined."""
