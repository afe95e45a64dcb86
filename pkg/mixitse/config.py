import math
import os
from collections import OrderedDict

import simplejson as json

from mixitse.exceptions import ConfigError


def _check(condition, message, *args):
  if not condition:
    raise ConfigError(message % args)


def _is_number(value):
  return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_count(value, minimum=0):
  return isinstance(value, int) and not isinstance(value, bool) and value >= minimum


class Options(object):
  """
  A config section with declared fields.

  Subclasses list FIELDS as (name, default) pairs. Unknown keys are rejected,
  absent keys take their default, and validate() runs on every construction.
  """
  SECTION = None
  FIELDS = ()

  def __init__(self, **kwargs):
    names = [name for name, _ in self.FIELDS]
    unknown = sorted(key for key in kwargs if key not in names)
    if unknown:
      raise ConfigError('unknown key "%s" in section "%s"' % (unknown[0], self.SECTION))
    for name, default in self.FIELDS:
      setattr(self, name, kwargs.get(name, default))
    self.validate()

  def validate(self):
    pass

  @classmethod
  def from_dict(cls, data):
    if data is None:
      return cls()
    if not isinstance(data, dict):
      raise ConfigError('section "%s" must be a JSON object' % cls.SECTION)
    return cls(**data)

  def replace(self, **changes):
    data = self.to_dict()
    data.update(changes)
    return type(self)(**data)

  def to_dict(self):
    return OrderedDict((name, getattr(self, name)) for name, _ in self.FIELDS)

  def to_json(self):
    return json.dumps(self.to_dict(), sort_keys=True)

  def __eq__(self, other):
    return type(self) is type(other) and self.to_dict() == other.to_dict()

  def __ne__(self, other):
    return not self == other

  def __hash__(self):
    return hash((type(self).__name__, self.to_json()))

  def __repr__(self):
    return '%s(%s)' % (type(self).__name__, ', '.join('%s=%r' % item for item in self.to_dict().items()))


class StftConfig(Options):
  SECTION = 'stft'
  FIELDS = (
    ('frame_len', 512),
    ('hop', 128),
  )

  def validate(self):
    _check(_is_count(self.frame_len, 2) and self.frame_len % 2 == 0, 'stft.frame_len must be a positive even integer')
    _check(_is_count(self.hop, 1), 'stft.hop must be a positive integer')
    _check(self.frame_len % self.hop == 0, 'stft.hop must divide stft.frame_len')

  @property
  def fft_len(self):
    return self.frame_len

  @property
  def num_bins(self):
    return self.frame_len // 2 + 1


class ModelConfig(Options):
  SECTION = 'model'
  FIELDS = (
    ('num_outputs', 3),
    ('base_channels', 16),
    ('enc_depth', 3),
    ('tcn_repeats', 2),
    ('tcn_blocks', 7),
    ('tcn_hidden', 64),
  )

  def validate(self):
    _check(_is_count(self.num_outputs, 2) and self.num_outputs <= 3, 'model.num_outputs must be 2 or 3')
    _check(_is_count(self.base_channels, 1), 'model.base_channels must be a positive integer')
    _check(_is_count(self.enc_depth, 1), 'model.enc_depth must be at least 1')
    _check(_is_count(self.tcn_repeats, 1), 'model.tcn_repeats must be at least 1')
    _check(_is_count(self.tcn_blocks, 1), 'model.tcn_blocks must be at least 1')
    _check(_is_count(self.tcn_hidden, 1), 'model.tcn_hidden must be a positive integer')

  @staticmethod
  def tiny(**changes):
    options = {
      'base_channels': 4,
      'enc_depth': 2,
      'tcn_repeats': 1,
      'tcn_blocks': 3,
      'tcn_hidden': 16,
    }
    options.update(changes)
    return ModelConfig(**options)

  @property
  def dilations(self):
    return [2 ** x for x in range(self.tcn_blocks)]

  @property
  def min_frames(self):
    return 2 ** (self.tcn_blocks - 1) + 1


class SamplerConfig(Options):
  SECTION = 'sampler'
  FIELDS = (
    ('snr_low_db', -5.0),
    ('snr_high_db', 5.0),
    ('clean_ratio', 0.5),
    ('chunk_len', 32000),
    ('seed', 0),
    ('rir_enabled', False),
    ('simu_target', 'clean'),
    ('max_clean', None),
    ('max_noisy', None),
  )

  def validate(self):
    _check(_is_number(self.snr_low_db) and _is_number(self.snr_high_db), 'sampler SNR bounds must be finite numbers')
    _check(self.snr_low_db <= self.snr_high_db, 'sampler.snr_low_db must not exceed sampler.snr_high_db')
    _check(_is_number(self.clean_ratio) and 0 <= self.clean_ratio <= 1, 'sampler.clean_ratio must lie in [0, 1]')
    _check(_is_count(self.chunk_len, StftConfig().frame_len), 'sampler.chunk_len must be at least one STFT frame')
    _check(_is_count(self.seed), 'sampler.seed must be a non-negative integer')
    _check(isinstance(self.rir_enabled, bool), 'sampler.rir_enabled must be a boolean')
    _check(self.simu_target in ('clean', 'noisy'), 'sampler.simu_target must be "clean" or "noisy"')
    for name in ('max_clean', 'max_noisy'):
      value = getattr(self, name)
      _check(value is None or _is_count(value), 'sampler.%s must be null or a non-negative integer', name)


class TrainConfig(Options):
  SECTION = 'train'
  FIELDS = (
    ('lr', 1e-3),
    ('batch_size', 8),
    ('epochs', 100),
    ('steps_per_epoch', 100),
    ('plateau_patience', 3),
    ('lr_factor', 0.5),
    ('adam_beta1', 0.9),
    ('adam_beta2', 0.999),
    ('adam_eps', 1e-8),
    ('seed', 0),
    ('loss_mode', 'per_term'),
    ('supervised', False),
    ('grad_clip', 5.0),
    ('val_size', 16),
    ('log_every', 10),
  )

  def validate(self):
    _check(_is_number(self.lr) and self.lr > 0, 'train.lr must be positive')
    _check(_is_count(self.batch_size, 1), 'train.batch_size must be at least 1')
    _check(_is_count(self.epochs), 'train.epochs must be a non-negative integer')
    _check(_is_count(self.steps_per_epoch, 1), 'train.steps_per_epoch must be at least 1')
    _check(_is_count(self.plateau_patience, 1), 'train.plateau_patience must be at least 1')
    _check(_is_number(self.lr_factor) and 0 < self.lr_factor < 1, 'train.lr_factor must lie in (0, 1)')
    _check(_is_number(self.adam_beta1) and 0 <= self.adam_beta1 < 1, 'train.adam_beta1 must lie in [0, 1)')
    _check(_is_number(self.adam_beta2) and 0 <= self.adam_beta2 < 1, 'train.adam_beta2 must lie in [0, 1)')
    _check(_is_number(self.adam_eps) and self.adam_eps > 0, 'train.adam_eps must be positive')
    _check(_is_count(self.seed), 'train.seed must be a non-negative integer')
    _check(self.loss_mode in ('per_term', 'joint'), 'train.loss_mode must be "per_term" or "joint"')
    _check(isinstance(self.supervised, bool), 'train.supervised must be a boolean')
    _check(_is_number(self.grad_clip) and self.grad_clip > 0, 'train.grad_clip must be positive')
    _check(_is_count(self.val_size, 1), 'train.val_size must be at least 1')
    _check(_is_count(self.log_every, 1), 'train.log_every must be at least 1')


class RemixConfig(Options):
  SECTION = 'remix'
  FIELDS = (
    ('beta_db', None),
  )

  def validate(self):
    _check(self.beta_db is None or _is_number(self.beta_db), 'remix.beta_db must be null or a finite number')


class ManifestPaths(Options):
  SECTION = 'manifests'
  FIELDS = (
    ('clean', None),
    ('noise', None),
    ('noisy', None),
    ('val_clean', None),
    ('val_noise', None),
  )

  def validate(self):
    for name, _ in self.FIELDS:
      value = getattr(self, name)
      _check(value is None or isinstance(value, str), 'manifests.%s must be a path string', name)

  def resolved(self, base_dir):
    return self.replace(**{
      name: os.path.normpath(os.path.join(base_dir, getattr(self, name)))
      for name, _ in self.FIELDS if getattr(self, name)
    })


class RunConfig(object):
  """The JSON document accepted by `manage.py train` and `manage.py sweep`."""
  SECTIONS = OrderedDict([
    ('manifests', ManifestPaths),
    ('model', ModelConfig),
    ('sampler', SamplerConfig),
    ('train', TrainConfig),
    ('remix', RemixConfig),
    ('stft', StftConfig),
  ])

  def __init__(self, manifests=None, model=None, sampler=None, train=None, remix=None, stft=None):
    self.manifests = manifests or ManifestPaths()
    self.model = model or ModelConfig()
    self.sampler = sampler or SamplerConfig()
    self.train = train or TrainConfig()
    self.remix = remix or RemixConfig()
    self.stft = stft or StftConfig()
    self.validate()

  def validate(self):
    if self.train.supervised:
      _check(self.sampler.clean_ratio == 1, 'train.supervised requires sampler.clean_ratio == 1')
    _check(self.sampler.chunk_len >= self.stft.frame_len, 'sampler.chunk_len must be at least stft.frame_len')
    frames = 1 + self.sampler.chunk_len // self.stft.hop
    _check(
      frames >= self.model.min_frames,
      'sampler.chunk_len gives %d STFT frames, the model needs at least %d', frames, self.model.min_frames)

  @staticmethod
  def from_dict(data, base_dir=None):
    if not isinstance(data, dict):
      raise ConfigError('run config must be a JSON object')
    unknown = sorted(key for key in data if key not in RunConfig.SECTIONS)
    if unknown:
      raise ConfigError('unknown key "%s" in run config' % unknown[0])
    sections = {
      name: option_class.from_dict(data.get(name))
      for name, option_class in RunConfig.SECTIONS.items()
    }
    if base_dir is not None:
      sections['manifests'] = sections['manifests'].resolved(base_dir)
    return RunConfig(**sections)

  @staticmethod
  def load(path):
    try:
      with open(path, 'r') as handle:
        data = json.load(handle)
    except IOError as ex:
      raise ConfigError('cannot read run config %s: %s' % (path, ex))
    except json.JSONDecodeError as ex:
      raise ConfigError('run config %s is not valid JSON: %s' % (path, ex))
    return RunConfig.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

  def replace(self, **sections):
    data = {name: getattr(self, name) for name in self.SECTIONS}
    data.update(sections)
    return RunConfig(**data)

  def to_dict(self):
    return OrderedDict((name, getattr(self, name).to_dict()) for name in self.SECTIONS)

  def to_json(self):
    return json.dumps(self.to_dict(), sort_keys=True, indent=2)
