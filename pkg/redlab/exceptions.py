class RedlabError(Exception):
    """base"""


class BadValue(RedlabError):
    """configuration or argument contained a malformed value"""


class UsageError(BadValue):
    """command line could not be parsed"""


class DimensionMismatch(RedlabError):
    """array or layer dimensions do not chain"""


class NonFiniteLoss(RedlabError):
    """loss or parameters became nan or inf"""


class EmptyInput(RedlabError):
    """an operation that needs data got none"""


class ParseError(RedlabError):
    """malformed input file

    ``offset`` is the byte offset for binary formats, ``line`` the 1-based
    line number for text formats.
    """

    def __init__(self, message, offset=None, line=None):
        where = []
        if offset is not None:
            where.append(f'offset {offset}')
        if line is not None:
            where.append(f'line {line}')

        super().__init__(f'{message} ({", ".join(where)})' if where else message)
        self.offset = offset
        self.line = line


class BadMagic(ParseError):
    """magic bytes do not match the expected format"""


class TruncatedPayload(ParseError):
    """file ends before the header says it should"""


class DimOverflow(ParseError):
    """declared dimensions are impossibly large"""


class NotSufficient(RedlabError):
    """feature map loses information about the target"""

    def __init__(self, mi_gap):
        super().__init__(f'feature map is not sufficient, I(X;Y) - I(T(X);Y) = {mi_gap:.9g} bits')
        self.mi_gap = mi_gap


class InvalidAdversarialSpec(RedlabError):
    """adversarial set, anchor and decision map are inconsistent"""


class CombinatorialCapExceeded(RedlabError):
    """exhaustive enumeration would exceed the configured cap"""


class AcceptanceFailure(RedlabError):
    """a directional experiment check did not hold"""


class Unwritable(RedlabError):
    """report destination cannot be written"""
