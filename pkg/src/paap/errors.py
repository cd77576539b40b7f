"""Exception hierarchy shared by all paap modules."""


class PaapError(Exception):
    """Base class for every domain error raised by paap."""


class ArgumentError(PaapError, ValueError):
    """Invalid argument value or shape."""


class WavFormatError(PaapError):
    """Malformed RIFF/WAVE file."""


class UnsupportedCodecError(PaapError):
    """WAV encoding other than PCM16 or IEEE float32."""


class DegenerateSignalError(PaapError, ValueError):
    """Signal with no energy where a non-zero one is required."""


class SingularMatrixError(PaapError, ArithmeticError):
    """Normal equations could not be factorized."""


class VocabularyError(PaapError, KeyError):
    """Phoneme label not present in the vocabulary."""

    def __str__(self):
        return Exception.__str__(self)


class AlignmentFormatError(PaapError):
    """Alignment document violates the interval/logits schema."""


class WeightsFormatError(PaapError):
    """Weight file is incomplete, mis-shaped or non-finite."""


class NumericalInstabilityWarning(RuntimeWarning):
    """Levinson-Durbin recursion hit a reflection coefficient with |k| >= 1."""
