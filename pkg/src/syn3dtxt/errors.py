"""Exception hierarchy shared across the generation and audit pipeline."""


class Syn3DTxtError(Exception):
    """Base class for all package errors."""


class ConfigurationError(Syn3DTxtError):
    """Unusable resources or invalid configuration (missing fonts, empty corpus...)."""


class GlyphCoverageError(Syn3DTxtError):
    """A font cannot render one of the requested characters."""


class DegenerateProjectionError(Syn3DTxtError):
    """A quad corner fell at or behind the camera's near limit."""


class DegenerateHomographyError(Syn3DTxtError):
    """Point correspondences do not determine an invertible homography."""


class PairingContractError(Syn3DTxtError):
    """The two elements of a paired sample were rendered with different styles."""


class ResampleExhaustedError(Syn3DTxtError):
    """Rotation resampling failed to find a non-degenerate draw within the attempt budget."""


class GenerationError(Syn3DTxtError):
    """One or more samples of a dataset run failed to generate."""

    def __init__(self, failures):
        self.failures = list(failures)  # (index, message) pairs
        indices = ", ".join(str(i) for i, _ in self.failures[:20])
        more = "" if len(self.failures) <= 20 else f" (+{len(self.failures) - 20} more)"
        super().__init__(f"{len(self.failures)} sample(s) failed: indices {indices}{more}")


class ManifestError(Syn3DTxtError):
    """The dataset manifest is missing, unreadable, or malformed."""
