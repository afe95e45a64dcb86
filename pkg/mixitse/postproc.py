"""
Inference and post-processing: running a trained network on a waveform,
remixing its output with the unprocessed input, and the SNR metrics.
"""
import logging
import math

import numpy as np

from mixitse.audio_io import AudioClip
from mixitse.config import StftConfig
from mixitse.dsp import istft, num_frames, stft
from mixitse.enh_model import forward
from mixitse.exceptions import ShapeMismatch, SilentEnhanced, SilentNoisy, SilentReference
from mixitse.mixer import signal_power

logger = logging.getLogger(__name__)

SNR_CAP_DB = 100.0


def _check_lengths(first, second):
  if len(first) != len(second):
    raise ShapeMismatch('signals of %d and %d samples' % (len(first), len(second)))


def remix_gain(enhanced, noisy, beta_db):
  _check_lengths(enhanced, noisy)
  enhanced_power = signal_power(enhanced)
  noisy_power = signal_power(noisy)
  if enhanced_power == 0:
    raise SilentEnhanced('cannot remix against a silent enhanced signal')
  if noisy_power == 0:
    raise SilentNoisy('cannot remix with a silent noisy signal')
  return math.sqrt(enhanced_power / noisy_power) * 10.0 ** (-beta_db / 20.0)


def remix(enhanced, noisy, beta_db):
  """enhanced + g * noisy, with g chosen so enhanced sits beta_db above g * noisy."""
  gain = remix_gain(enhanced, noisy, beta_db)
  return enhanced.with_samples(enhanced.samples + gain * noisy.samples)


def snr_db(ref, est):
  """10 log10(power(ref) / power(est - ref)), clamped to +/-100 dB."""
  _check_lengths(ref, est)
  ref_power = signal_power(ref)
  if ref_power == 0:
    raise SilentReference('SNR against a silent reference is undefined')
  error_power = float(np.mean((est.samples - ref.samples) ** 2))
  if error_power == 0:
    return SNR_CAP_DB
  value = 10.0 * math.log10(ref_power / error_power)
  return float(min(SNR_CAP_DB, max(-SNR_CAP_DB, value)))


def snri_db(clean, enhanced, noisy):
  return snr_db(clean, enhanced) - snr_db(clean, noisy)


def enhance_clip(params, clip, model_cfg, stft_cfg=None):
  """
  Channel-1 estimate for a waveform of any length.

  The input is divided by its RMS before analysis and the output multiplied
  back. Inputs shorter than the network's receptive field are zero-padded and
  the output trimmed to the input length.
  """
  stft_cfg = stft_cfg or StftConfig()
  length = len(clip)
  power = signal_power(clip)
  if power == 0:
    logger.debug('Silent input of %d samples, returning silence', length)
    return clip.with_samples(np.zeros(length))
  rms = math.sqrt(power)

  samples = clip.samples / rms
  if num_frames(length, stft_cfg) < model_cfg.min_frames:
    samples = np.concatenate([samples, np.zeros((model_cfg.min_frames - 1) * stft_cfg.hop - length)])

  estimates = forward(params, stft(AudioClip(samples, clip.sample_rate), stft_cfg), model_cfg)
  speech = istft(estimates.speech).samples[:length]
  return clip.with_samples(speech * rms)
