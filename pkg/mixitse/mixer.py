"""
Dynamic mixture generation.

Every example pairs a speech-bearing reference x1 (a clean chunk, a real noisy
chunk, or a simulated noisy chunk) with a noise reference x2 that is stored
already scaled, so the network input is literally x1 + x2 and the SNR between
the two references is exactly the sampled alpha. SNRs are computed on
full-chunk mean-square power.
"""
import logging
import math

import numpy as np
from scipy.signal import convolve

from mixitse.audio_io import AudioClip, SAMPLE_RATE, read_wav
from mixitse.exceptions import EmptyManifest, EmptySignal, ShapeMismatch, SilentSignal

logger = logging.getLogger(__name__)

CLEAN_TARGET = 'clean_target'
REAL_NOISY = 'real_noisy'
SIMU_NOISY = 'simu_noisy'
EXAMPLE_KINDS = (CLEAN_TARGET, REAL_NOISY, SIMU_NOISY)

MAX_RESAMPLES = 10
RIR_LENGTH = 2048


def _samples(clip):
  return clip.samples if isinstance(clip, AudioClip) else np.asarray(clip, dtype=np.float64)


def signal_power(clip):
  samples = _samples(clip)
  if samples.shape[0] == 0:
    raise EmptySignal('power of an empty signal is undefined')
  return float(np.mean(samples ** 2))


def snr_between(primary, secondary):
  return 10.0 * math.log10(signal_power(primary) / signal_power(secondary))


def scale_to_snr(primary, secondary, alpha_db):
  """Gain for `secondary` so that primary vs. gain * secondary sits at alpha_db."""
  if len(_samples(primary)) != len(_samples(secondary)):
    raise ShapeMismatch('clips of %d and %d samples cannot be mixed' % (len(_samples(primary)), len(_samples(secondary))))
  primary_power = signal_power(primary)
  secondary_power = signal_power(secondary)
  if primary_power == 0 or secondary_power == 0:
    raise SilentSignal('cannot set an SNR against a silent signal')
  return math.sqrt(primary_power / secondary_power) * 10.0 ** (-alpha_db / 20.0)


def convolve_rir(clip, h):
  """Linear FIR convolution truncated to the clip's length."""
  samples = _samples(clip)
  taps = _samples(h)
  if taps.shape[0] == 0 or taps.shape[0] >= samples.shape[0]:
    raise ShapeMismatch('impulse response of %d taps needs a longer clip than %d samples' % (taps.shape[0], samples.shape[0]))
  wet = convolve(samples, taps, mode='full')[:samples.shape[0]]
  return AudioClip(wet, clip.sample_rate if isinstance(clip, AudioClip) else SAMPLE_RATE)


def synthetic_rir(rng, length=RIR_LENGTH, sample_rate=16000):
  """An exponentially decaying noise burst with a unit direct path."""
  rt60 = rng.uniform(0.2, 0.6)
  decay = np.exp(-6.9 * np.arange(length) / (rt60 * sample_rate))
  taps = rng.standard_normal(length) * decay * 0.1
  taps[0] = 1.0
  return AudioClip(taps / np.max(np.abs(taps)), sample_rate)


class MixExample(object):
  def __init__(self, input, refs, kind, alpha_db):
    if kind not in EXAMPLE_KINDS:
      raise ValueError('unknown example kind %r' % kind)
    self.input = input
    self.refs = refs
    self.kind = kind
    self.alpha_db = alpha_db

  @property
  def speech(self):
    return self.refs[0]

  @property
  def noise(self):
    return self.refs[1]

  def to_dict(self):
    return {
      'kind': self.kind,
      'alpha_db': self.alpha_db,
      'length': len(self.input),
    }

  def __repr__(self):
    return 'MixExample(%s, alpha=%.2f dB, %d samples)' % (self.kind, self.alpha_db, len(self.input))


def build_example(x1, noise, alpha_db, kind):
  gain = scale_to_snr(x1, noise, alpha_db)
  x2 = noise.samples * gain
  return MixExample(AudioClip(x1.samples + x2, x1.sample_rate), [x1, AudioClip(x2, x1.sample_rate)], kind, alpha_db)


class MixtureSources(object):
  """In-memory audio for the three corpus roles, loaded once from manifests."""

  def __init__(self, clean=None, noise=None, noisy=None):
    self.clean = list(clean or [])
    self.noise = list(noise or [])
    self.noisy = list(noisy or [])

  @staticmethod
  def from_manifests(clean=None, noise=None, noisy=None, cfg=None):
    max_clean = cfg.max_clean if cfg is not None else None
    max_noisy = cfg.max_noisy if cfg is not None else None

    def _load(manifest, count=None):
      if manifest is None:
        return []
      return [read_wav(entry.path) for entry in manifest.head(count)]

    sources = MixtureSources(_load(clean, max_clean), _load(noise), _load(noisy, max_noisy))
    logger.info(
      'Loaded mixture sources: %d clean, %d noise, %d noisy',
      len(sources.clean), len(sources.noise), len(sources.noisy))
    return sources

  def check(self, cfg):
    if cfg.clean_ratio > 0 and not self.clean:
      raise EmptyManifest('clean_ratio %.2f needs at least one clean clip' % cfg.clean_ratio)
    if cfg.clean_ratio < 1 and not self.noisy:
      raise EmptyManifest('clean_ratio %.2f needs at least one noisy clip' % cfg.clean_ratio)
    if not self.noise:
      raise EmptyManifest('mixing needs at least one noise clip')


def random_chunk(clip, chunk_len, rng):
  """A random contiguous crop; short clips are zero-padded at the tail."""
  samples = clip.samples
  if samples.shape[0] > chunk_len:
    start = int(rng.integers(0, samples.shape[0] - chunk_len + 1))
    return AudioClip(samples[start:start + chunk_len], clip.sample_rate)
  padded = np.zeros(chunk_len)
  padded[:samples.shape[0]] = samples
  return AudioClip(padded, clip.sample_rate)


def _pick(pool, cfg, rng):
  return random_chunk(pool[int(rng.integers(0, len(pool)))], cfg.chunk_len, rng)


def _draw_speech(sources, cfg, rng):
  if rng.random() < cfg.clean_ratio:
    speech = _pick(sources.clean, cfg, rng)
    if cfg.rir_enabled:
      speech = convolve_rir(speech, synthetic_rir(rng, sample_rate=speech.sample_rate))
    if cfg.simu_target == 'noisy':
      alpha = float(rng.uniform(cfg.snr_low_db, cfg.snr_high_db))
      simulated = build_example(speech, _pick(sources.noise, cfg, rng), alpha, SIMU_NOISY)
      return simulated.input, SIMU_NOISY
    return speech, CLEAN_TARGET
  return _pick(sources.noisy, cfg, rng), REAL_NOISY


def sample_example(sources, cfg, rng):
  sources.check(cfg)
  for attempt in range(MAX_RESAMPLES + 1):
    try:
      x1, kind = _draw_speech(sources, cfg, rng)
      noise = _pick(sources.noise, cfg, rng)
      alpha = float(rng.uniform(cfg.snr_low_db, cfg.snr_high_db))
      return build_example(x1, noise, alpha, kind)
    except SilentSignal:
      logger.debug('Silent chunk drawn (attempt %d), resampling', attempt + 1)
  raise SilentSignal('drew silent chunks %d times in a row' % (MAX_RESAMPLES + 1))


class MixtureSampler(object):
  """A seeded, endless stream of MixExamples."""

  def __init__(self, sources, cfg, seed=None):
    sources.check(cfg)
    self.sources = sources
    self.cfg = cfg
    self.rng = np.random.default_rng(cfg.seed if seed is None else seed)

  def draw(self):
    return sample_example(self.sources, self.cfg, self.rng)

  def batch(self, size):
    return [self.draw() for _ in range(size)]

  def __iter__(self):
    while True:
      yield self.draw()
