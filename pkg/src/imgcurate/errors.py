"""Exception hierarchy shared across the curation toolkit."""


class CurationError(Exception):
    """Base class for all toolkit errors."""


# --- image decoding / metrics ---

class UnsupportedFormat(CurationError):
    pass


class CorruptHeader(CurationError):
    pass


class InvalidMeta(CurationError):
    pass


class BandTooWide(CurationError):
    pass


class EmptyImage(CurationError):
    pass


class EncodeFailure(CurationError):
    pass


class DecodeFailure(CurationError):
    pass


# --- providers (embedders, scorers, rewriters) ---

class ProviderUnavailable(CurationError):
    pass


class EmptyText(CurationError):
    pass


# --- vectors / retrieval ---

class DimensionMismatch(CurationError):
    pass


class DegenerateAggregate(CurationError):
    pass


class EmptyIndex(CurationError):
    pass


class IndexNotBuilt(CurationError):
    pass


class InsufficientCandidates(CurationError):
    pass


class InvalidQuery(CurationError):
    pass


# --- dedup / manifests ---

class UnknownRecordInGroup(CurationError):
    pass


class ManifestError(CurationError):
    pass


# --- taxonomy / captions ---

class NoSignal(CurationError):
    pass


class UnknownCategory(CurationError):
    pass


class SchemaError(CurationError):
    pass


class InvalidPatch(CurationError):
    pass


class WouldInvalidate(CurationError):
    pass


class InvalidCaption(CurationError):
    pass


class VersionConflict(CurationError):
    pass


# --- pipeline ---

class NonMonotoneProfiles(CurationError):
    pass


class EmptyCorpus(CurationError):
    pass


class InsufficientData(CurationError):
    pass


# --- service sessions ---

class NoPositives(CurationError):
    pass


class UnknownQuery(CurationError):
    pass


class ConfigError(CurationError):
    pass
