"""Exception types raised across the package."""


class FuzzError(Exception):
    """Base class for all statefuzz errors."""


class OutOfRange(FuzzError):
    pass


class LengthMismatch(FuzzError):
    pass


class CorpusError(FuzzError):
    pass


class BadMagic(CorpusError):
    pass


class Truncated(CorpusError):
    pass


class VersionMismatch(CorpusError):
    pass


class NoGrammar(FuzzError):
    pass


class EmptyModel(FuzzError):
    pass


class EmptyCorpus(FuzzError):
    pass


class NoStateSeq(FuzzError):
    pass


class NoParse(FuzzError):
    """No usable JSON field array could be extracted from an LLM answer."""


class UnsortedInput(FuzzError):
    pass


class ConfigError(FuzzError):
    pass
