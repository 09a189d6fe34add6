"""Exception hierarchy.

``InputError`` subclasses map to CLI exit code 1 and ``NumericalError``
subclasses to exit code 2.
"""


class RegbenchError(Exception):
    pass


class InputError(RegbenchError):
    pass


class MalformedPostError(InputError):
    pass


class JoinError(InputError):
    pass


class ParseError(InputError):
    pass


class NumericalError(RegbenchError):
    pass


class DegenerateColumnError(NumericalError):
    pass


class CollinearityError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass
