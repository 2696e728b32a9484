"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the CLI can map it without a
lookup table: 1 for semantic/scenario problems, 2 for parse failures.
"""


class LatArbError(Exception):
    exit_code = 1


class InadmissibleParameters(LatArbError, ValueError):
    """Linear market parameters imply a nonpositive equilibrium holding."""


class OrderTooLarge(LatArbError, ValueError):
    """The order would push the price beyond a demand curve's intercept."""


class DominanceViolated(LatArbError, ValueError):
    """The large venue's density does not exceed the small venue's."""


class InvalidStats(LatArbError, ValueError):
    pass


class WrongDistributionKind(LatArbError, TypeError):
    pass


class InvalidRatio(LatArbError, ValueError):
    pass


class UnreachableTarget(LatArbError, ValueError):
    pass


class ConfigError(LatArbError, ValueError):
    pass


class ParseError(LatArbError, ValueError):
    exit_code = 2

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
