"""Exception types shared across the package."""


class SeamcamError(Exception):
    """Base class for all errors raised by this package."""


# mask codec / geometry

class MalformedRle(SeamcamError):
    """Run-length counts are negative or do not cover height*width pixels."""


class ShapeMismatch(SeamcamError):
    """Operands have different raster dimensions."""


class EmptyInput(SeamcamError):
    """An operation that needs at least one element got none."""


# scoring

class ConfigError(SeamcamError):
    """Scoring configuration outside the accepted range."""


class InvalidRequest(SeamcamError):
    """Scoring request violates its invariants (empty GT union, shape mismatch)."""


# study statistics

class DegenerateTable(SeamcamError):
    """No discordant pairs; the paired statistic is undefined."""


class InvalidCounts(SeamcamError):
    """Success/trial counts outside 0 <= k <= n, n > 0."""


class LengthMismatch(SeamcamError):
    """Paired vectors differ in length or are too short."""


class ZeroVariance(SeamcamError):
    """A rank vector is constant; correlation is undefined."""


class NoEvaluablePairs(SeamcamError):
    """Every pair was excluded (tie, insufficient votes, or undecidable prediction)."""


class InsufficientData(SeamcamError):
    """Sweep dataset is empty or lacks the fields needed to re-gate offline."""


# interchange files

class ParseError(SeamcamError):
    """Malformed bundle or study file; message names the offending field/index."""


class VersionError(SeamcamError):
    """Unknown interchange schema version."""


class EmptyCandidates(SeamcamError):
    """Candidate set has no scored candidates to pick a hard negative from."""


# study service

class SessionComplete(SeamcamError):
    """Participant has answered every trial in their plan."""


class UnknownParticipant(SeamcamError):
    """Participant id is not part of the configured study."""


class DuplicateVote(SeamcamError):
    """Trial already has an acknowledged vote."""


class UnknownTrial(SeamcamError):
    """Trial id was never issued to this participant."""
