"""
Desk-scale synthetic corpus.

"clean" clips are harmonic tones with a slowly wandering envelope, "noise"
clips are low-passed white noise, and "noisy" clips mix independently drawn
clean-style and noise-style signals and then pass them through a soft
saturation, so the real-noisy pool is mismatched with anything built from the
clean and noise pools.
"""
import logging
import os

import numpy as np
from scipy.signal import butter, lfilter

from mixitse.audio_io import AudioClip, Manifest, ManifestEntry, SAMPLE_RATE, write_wav
from mixitse.exceptions import IoFailure
from mixitse.mixer import build_example, CLEAN_TARGET

logger = logging.getLogger(__name__)

CLIP_SECONDS = 4.0
ENVELOPE_RATE = 50

# Pool name -> manifest kind. The validation pools draw from their own seed streams.
POOLS = ('clean', 'noise', 'noisy', 'val_clean', 'val_noise')
POOL_KINDS = {
  'clean': 'clean',
  'noise': 'noise',
  'noisy': 'noisy',
  'val_clean': 'clean',
  'val_noise': 'noise',
}


def _clip_rng(seed, pool, index):
  return np.random.default_rng([seed, POOLS.index(pool), index])


def synth_speech(rng, length):
  t = np.arange(length) / float(SAMPLE_RATE)
  f0 = rng.uniform(90.0, 300.0)
  harmonics = int(rng.integers(3, 7))
  tone = np.zeros(length)
  for h in range(1, harmonics + 1):
    tone += np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi)) / h

  # Slow random amplitude modulation: smoothed noise sampled at 50 Hz, interpolated.
  knots = int(length * ENVELOPE_RATE / SAMPLE_RATE) + 2
  coarse = np.convolve(rng.uniform(0.0, 1.0, knots), np.ones(5) / 5.0, mode='same')
  envelope = np.interp(t, np.arange(knots) / float(ENVELOPE_RATE), coarse) + 0.05
  signal = tone * envelope
  return signal * rng.uniform(0.3, 0.8) / np.max(np.abs(signal))


def synth_noise(rng, length):
  cutoff = rng.uniform(500.0, 4000.0)
  b, a = butter(2, cutoff, btype='low', fs=SAMPLE_RATE)
  signal = lfilter(b, a, rng.standard_normal(length))
  return signal * rng.uniform(0.2, 0.6) / np.max(np.abs(signal))


def synth_noisy(rng, length):
  speech = AudioClip(synth_speech(rng, length))
  noise = AudioClip(synth_noise(rng, length))
  mixture = build_example(speech, noise, float(rng.uniform(-5.0, 5.0)), CLEAN_TARGET).input.samples
  drive = 2.0
  return np.tanh(drive * mixture / np.max(np.abs(mixture))) * 0.8 / np.tanh(drive)


GENERATORS = {
  'clean': synth_speech,
  'noise': synth_noise,
  'noisy': synth_noisy,
}


def _write_pool(out_dir, pool, count, seed, length):
  pool_dir = os.path.join(out_dir, pool)
  try:
    os.makedirs(pool_dir, exist_ok=True)
  except OSError as ex:
    raise IoFailure('cannot create %s: %s' % (pool_dir, ex))
  kind = POOL_KINDS[pool]
  entries = []
  for index in range(count):
    path = os.path.abspath(os.path.join(pool_dir, '%s_%04d.wav' % (pool, index)))
    write_wav(AudioClip(GENERATORS[kind](_clip_rng(seed, pool, index), length)), path)
    entries.append(ManifestEntry(path, kind, length / float(SAMPLE_RATE)))
  manifest_path = os.path.join(out_dir, '%s.jsonl' % pool)
  Manifest(entries).save(manifest_path)
  logger.info('Wrote %d %s clips to %s', count, pool, pool_dir)
  return manifest_path


def gen_synth_corpus(out_dir, n_clean, n_noise, n_noisy, seed, n_val=0):
  """
  Write <out_dir>/<pool>/*.wav and <out_dir>/<pool>.jsonl; returns {pool: manifest path}.

  Manifests list exactly the clips written by this call, so regenerating
  into an old directory never picks up leftovers. With n_val > 0 the
  val_clean and val_noise pools are written too.
  """
  length = int(CLIP_SECONDS * SAMPLE_RATE)
  counts = {'clean': n_clean, 'noise': n_noise, 'noisy': n_noisy}
  if n_val > 0:
    counts.update(val_clean=n_val, val_noise=n_val)
  return dict((pool, _write_pool(out_dir, pool, counts[pool], seed, length)) for pool in POOLS if pool in counts)
