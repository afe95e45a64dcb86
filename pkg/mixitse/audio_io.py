"""
Waveform files and corpus manifests.

Only mono, 16-bit PCM, 16 kHz WAV files are accepted. Decoding divides the
integer samples by 32768. Encoding clamps to [-1, 1], multiplies by 32768,
rounds half away from zero and saturates at 32767, so 1.0 writes as 32767,
-1.0 as -32768, and every PCM payload survives a read/write round trip
bit for bit.
"""
import logging
import os

import numpy as np
import simplejson as json
import soundfile as sf

from mixitse.exceptions import CorruptFile, IoFailure, UnsupportedFormat

logger = logging.getLogger(__name__)

SAMPLE_RATE = 16000
KINDS = ('clean', 'noise', 'noisy')

PCM_SCALE = 32768.0
PCM_MAX = 32767


class AudioClip(object):
  def __init__(self, samples, sample_rate=SAMPLE_RATE):
    samples = np.array(samples, dtype=np.float64, ndmin=1)
    if samples.ndim != 1:
      raise UnsupportedFormat('audio clips are mono, got samples of shape %s' % (samples.shape,))
    if not np.all(np.isfinite(samples)):
      raise UnsupportedFormat('audio clip contains NaN or Inf samples')
    if not isinstance(sample_rate, (int, np.integer)) or sample_rate <= 0:
      raise UnsupportedFormat('sample rate must be a positive integer, got %r' % (sample_rate,))
    samples.setflags(write=False)
    self.samples = samples
    self.sample_rate = int(sample_rate)

  def __len__(self):
    return self.samples.shape[0]

  @property
  def duration_s(self):
    return len(self) / float(self.sample_rate)

  def with_samples(self, samples):
    return AudioClip(samples, self.sample_rate)

  def __repr__(self):
    return 'AudioClip(%d samples @ %d Hz)' % (len(self), self.sample_rate)


def decode_pcm(pcm):
  return np.asarray(pcm, dtype=np.float64) / PCM_SCALE


def encode_pcm(samples):
  scaled = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0) * PCM_SCALE
  rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
  return np.clip(rounded, -PCM_SCALE, PCM_MAX).astype(np.int16)


def probe_wav(path):
  """Validate a WAV header and return its frame count."""
  if not os.path.isfile(path):
    raise IoFailure('no such file: %s' % path)
  try:
    info = sf.info(path)
  except RuntimeError as ex:
    raise CorruptFile('%s: %s' % (path, ex))
  if info.format != 'WAV' or info.subtype != 'PCM_16':
    raise UnsupportedFormat('%s: expected 16-bit PCM WAV, got %s/%s' % (path, info.format, info.subtype))
  if info.channels != 1:
    raise UnsupportedFormat('%s: expected mono, got %d channels' % (path, info.channels))
  if info.samplerate != SAMPLE_RATE:
    raise UnsupportedFormat('%s: expected %d Hz, got %d Hz' % (path, SAMPLE_RATE, info.samplerate))
  return info.frames


def read_wav(path):
  probe_wav(path)
  try:
    pcm, sample_rate = sf.read(path, dtype='int16', always_2d=False)
  except RuntimeError as ex:
    raise CorruptFile('%s: %s' % (path, ex))
  return AudioClip(decode_pcm(pcm), sample_rate)


def write_wav(clip, path):
  try:
    sf.write(path, encode_pcm(clip.samples), clip.sample_rate, subtype='PCM_16', format='WAV')
  except (RuntimeError, OSError) as ex:
    raise IoFailure('cannot write %s: %s' % (path, ex))


class ManifestEntry(object):
  def __init__(self, path, kind, duration_s):
    if kind not in KINDS:
      raise UnsupportedFormat('manifest kind must be one of %s, got %r' % (', '.join(KINDS), kind))
    self.path = path
    self.kind = kind
    self.duration_s = float(duration_s)

  def to_dict(self, relative_to=None):
    path = self.path
    if relative_to is not None:
      path = os.path.relpath(path, relative_to)
    return {
      'path': path,
      'kind': self.kind,
      'duration_s': self.duration_s,
    }

  def to_json(self, relative_to=None):
    return json.dumps(self.to_dict(relative_to), sort_keys=True)

  @staticmethod
  def from_dict(data, base_dir=None):
    try:
      path = data['path']
      if base_dir is not None and not os.path.isabs(path):
        path = os.path.normpath(os.path.join(base_dir, path))
      return ManifestEntry(path, data['kind'], data['duration_s'])
    except (KeyError, TypeError, ValueError) as ex:
      raise CorruptFile('bad manifest line %r: %s' % (data, ex))

  def __eq__(self, other):
    return isinstance(other, ManifestEntry) and self.to_dict() == other.to_dict()

  def __repr__(self):
    return 'ManifestEntry(%s, %s, %.3fs)' % (self.path, self.kind, self.duration_s)


class Manifest(object):
  def __init__(self, entries=None, skipped=0):
    self.entries = list(entries or [])
    self.skipped = skipped

  def __len__(self):
    return len(self.entries)

  def __iter__(self):
    return iter(self.entries)

  def by_kind(self, kind):
    return Manifest([entry for entry in self.entries if entry.kind == kind])

  def head(self, count):
    """The first `count` entries in manifest order; None keeps everything."""
    if count is None:
      return Manifest(self.entries, self.skipped)
    return Manifest(self.entries[:count], self.skipped)

  def to_jsonl(self, relative_to=None):
    return ''.join(entry.to_json(relative_to) + '\n' for entry in self.entries)

  def save(self, path):
    """Write JSON lines; paths are stored relative to the manifest's directory."""
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
      with open(path, 'w', encoding='utf-8') as handle:
        handle.write(self.to_jsonl(relative_to=base_dir))
    except OSError as ex:
      raise IoFailure('cannot write manifest %s: %s' % (path, ex))

  @staticmethod
  def load(path):
    base_dir = os.path.dirname(os.path.abspath(path))
    try:
      with open(path, 'r', encoding='utf-8') as handle:
        lines = [line for line in handle.read().splitlines() if line.strip()]
    except OSError as ex:
      raise IoFailure('cannot read manifest %s: %s' % (path, ex))
    entries = []
    for line in lines:
      try:
        data = json.loads(line)
      except json.JSONDecodeError as ex:
        raise CorruptFile('%s: bad JSON line: %s' % (path, ex))
      entries.append(ManifestEntry.from_dict(data, base_dir))
    return Manifest(entries)


def build_manifest(root, kind):
  if kind not in KINDS:
    raise UnsupportedFormat('manifest kind must be one of %s, got %r' % (', '.join(KINDS), kind))
  if not os.path.isdir(root):
    raise IoFailure('not a readable directory: %s' % root)

  paths = []
  try:
    for dirpath, dirnames, filenames in os.walk(os.path.abspath(root)):
      paths.extend(os.path.join(dirpath, name) for name in filenames if name.lower().endswith('.wav'))
  except OSError as ex:
    raise IoFailure('cannot list %s: %s' % (root, ex))

  entries = []
  skipped = 0
  for path in sorted(paths):
    try:
      frames = probe_wav(path)
    except (UnsupportedFormat, CorruptFile) as ex:
      logger.warning('Skipping %s', ex)
      skipped += 1
      continue
    entries.append(ManifestEntry(path, kind, frames / float(SAMPLE_RATE)))

  logger.info('Built %s manifest for %s: %d entries, %d skipped', kind, root, len(entries), skipped)
  return Manifest(entries, skipped)
