"""
STFT analysis/synthesis with a square-root Hann window.

Frames are centered: the signal is reflect-padded by frame_len/2 on each side,
which gives K = 1 + floor(len / hop) frames. Synthesis divides the
overlap-added frames by the summed squared window, so the round trip is exact
up to rounding for any length.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from mixitse.audio_io import AudioClip, SAMPLE_RATE
from mixitse.config import StftConfig
from mixitse.exceptions import EmptySignal, ShapeMismatch


def analysis_window(cfg):
  return np.sqrt(get_window('hann', cfg.frame_len, fftbins=True))


def num_frames(length, cfg):
  return 1 + length // cfg.hop


class Spectrogram(object):
  """Complex one-sided F x K array plus the config and signal length it came from."""

  def __init__(self, data, length, cfg=None, sample_rate=SAMPLE_RATE):
    cfg = cfg or StftConfig()
    data = np.array(data, dtype=np.complex128)
    if data.ndim != 2 or data.shape[0] != cfg.num_bins:
      raise ShapeMismatch('expected %d frequency bins, got array of shape %s' % (cfg.num_bins, data.shape))
    if data.shape[1] != num_frames(length, cfg):
      raise ShapeMismatch('%d frames do not match a signal of %d samples' % (data.shape[1], length))
    if not np.all(np.isfinite(data)):
      raise ShapeMismatch('spectrogram contains NaN or Inf entries')
    data.setflags(write=False)
    self.data = data
    self.length = int(length)
    self.config = cfg
    self.sample_rate = sample_rate

  @property
  def shape(self):
    return self.data.shape

  def with_data(self, data):
    return Spectrogram(data, self.length, self.config, self.sample_rate)

  def __add__(self, other):
    if self.shape != other.shape:
      raise ShapeMismatch('cannot add spectrograms of shapes %s and %s' % (self.shape, other.shape))
    return self.with_data(self.data + other.data)


def stft(clip, cfg=None):
  cfg = cfg or StftConfig()
  samples = clip.samples
  if samples.shape[0] < 1:
    raise EmptySignal('cannot analyse an empty clip')
  half = cfg.frame_len // 2
  padded = np.pad(samples, half, mode='reflect') if samples.shape[0] > 1 else np.pad(samples, half, mode='edge')
  frames = sliding_window_view(padded, cfg.frame_len)[::cfg.hop]
  spectrum = np.fft.rfft(frames * analysis_window(cfg), n=cfg.fft_len, axis=-1)
  return Spectrogram(spectrum.T, samples.shape[0], cfg, clip.sample_rate)


def istft(spec):
  cfg = spec.config
  bins, frames_count = spec.shape
  if bins != cfg.num_bins or frames_count != num_frames(spec.length, cfg):
    raise ShapeMismatch('spectrogram of shape %s does not match its config' % (spec.shape,))
  window = analysis_window(cfg)
  frames = np.fft.irfft(spec.data.T, n=cfg.fft_len, axis=-1)[:, :cfg.frame_len] * window

  total = cfg.frame_len + cfg.hop * (frames_count - 1)
  signal = np.zeros(total)
  envelope = np.zeros(total)
  squared = window ** 2
  for index in range(frames_count):
    start = index * cfg.hop
    signal[start:start + cfg.frame_len] += frames[index]
    envelope[start:start + cfg.frame_len] += squared

  half = cfg.frame_len // 2
  signal = signal[half:half + spec.length]
  envelope = envelope[half:half + spec.length]
  return AudioClip(signal / np.where(envelope > 1e-10, envelope, 1.0), spec.sample_rate)


def components(spec):
  """Real part, imaginary part and magnitude, each F x K."""
  data = spec.data if isinstance(spec, Spectrogram) else np.asarray(spec)
  return data.real.copy(), data.imag.copy(), np.abs(data)
