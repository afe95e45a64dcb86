class MixitError(Exception):
  """Base class for every error raised by the toolkit."""


class ConfigError(MixitError):
  pass


class IoFailure(MixitError):
  pass


class UnsupportedFormat(MixitError):
  pass


class CorruptFile(MixitError):
  pass


class EmptyManifest(MixitError):
  pass


class EmptySignal(MixitError):
  pass


class SilentSignal(MixitError):
  pass


class ShapeMismatch(MixitError):
  pass


class NonFiniteActivation(MixitError):
  pass


class MissingForwardContext(MixitError):
  pass


class UnsupportedOutputs(MixitError):
  pass


class NonFiniteGradient(MixitError):
  pass


class WrongKind(MixitError):
  pass


class DivergedLoss(MixitError):
  pass


class SilentEnhanced(SilentSignal):
  pass


class SilentNoisy(SilentSignal):
  pass


class SilentReference(SilentSignal):
  pass
