import numpy as np
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from mixitse.audio_io import AudioClip
from mixitse.config import StftConfig
from mixitse.dsp import Spectrogram, analysis_window, components, istft, num_frames, stft
from mixitse.exceptions import EmptySignal, ShapeMismatch
from mixitse.tests.mixit_test_case import MixitTestCase


class DspTestCase(MixitTestCase):
  def test_zero_clip_shape(self):
    spec = stft(AudioClip(np.zeros(32000)))
    self.assertEqual(spec.shape, (257, 251))
    self.assertFalse(np.any(spec.data))

  def test_frame_count(self):
    cfg = StftConfig()
    self.assertEqual(num_frames(32000, cfg), 251)
    self.assertEqual(num_frames(1000, cfg), 8)
    self.assertEqual(num_frames(127, cfg), 1)

  def test_round_trip(self):
    rng = np.random.default_rng(0)
    for index in range(100):
      length = (128, 1000, 32000)[index % 3]
      clip = AudioClip(rng.uniform(-1, 1, length))
      restored = istft(stft(clip))
      self.assertEqual(len(restored), length)
      self.assertLessEqual(np.max(np.abs(restored.samples - clip.samples)), 1e-6)

  def test_round_trip_single_sample(self):
    restored = istft(stft(AudioClip([0.25])))
    self.assertAlmostEqual(restored.samples[0], 0.25, places=9)

  def test_zero_spectrogram_synthesises_silence(self):
    restored = istft(Spectrogram(np.zeros((257, 9)), 1024))
    self.assertEqual(len(restored), 1024)
    self.assertFalse(np.any(restored.samples))

  @hypothesis_settings(max_examples=25, deadline=None)
  @given(st.integers(1, 3000), st.integers(0, 2 ** 32 - 1))
  def test_stft_is_linear(self, length, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, length)
    b = rng.uniform(-1, 1, length)
    summed = stft(AudioClip(a + b)).data
    np.testing.assert_allclose(summed, stft(AudioClip(a)).data + stft(AudioClip(b)).data, atol=1e-10)

  def test_bin_centred_cosine(self):
    bin_index = 32
    n = np.arange(32000)
    spec = stft(AudioClip(0.5 * np.cos(2 * np.pi * bin_index * n / 512.0)))
    _, _, magnitude = components(spec)
    interior = magnitude[:, 4:-4]
    self.assertTrue(np.all(np.argmax(interior, axis=0) == bin_index))
    far = np.abs(np.arange(257) - bin_index) >= 2
    margin_db = 20 * np.log10(interior[bin_index] / interior[far].max(axis=0))
    self.assertTrue(np.all(margin_db >= 20.0))

  def test_parseval_per_frame(self):
    rng = np.random.default_rng(3)
    cfg = StftConfig()
    window = analysis_window(cfg)
    for _ in range(10):
      frame = rng.standard_normal(cfg.frame_len)
      spectrum = np.fft.rfft(frame * window)
      weights = np.full(spectrum.shape[0], 2.0)
      weights[0] = weights[-1] = 1.0
      energy = np.sum((frame * window) ** 2)
      self.assertLessEqual(abs(np.sum(weights * np.abs(spectrum) ** 2) / cfg.fft_len - energy) / energy, 1e-9)

  def test_components(self):
    data = np.zeros((257, 2), dtype=np.complex128)
    data[5, 1] = 3 + 4j
    re, im, magnitude = components(Spectrogram(data, 128))
    self.assertEqual((re[5, 1], im[5, 1], magnitude[5, 1]), (3.0, 4.0, 5.0))
    np.testing.assert_array_equal(components(np.conj(data))[2], magnitude)
    for array in components(np.zeros((257, 2))):
      self.assertEqual(array.shape, (257, 2))
      self.assertFalse(np.any(array))

  def test_empty_clip(self):
    with self.assertRaises(EmptySignal):
      stft(AudioClip(np.zeros(0)))

  def test_spectrogram_shape_checks(self):
    with self.assertRaises(ShapeMismatch):
      Spectrogram(np.zeros((256, 2)), 128)
    with self.assertRaises(ShapeMismatch):
      Spectrogram(np.zeros((257, 3)), 128)
    with self.assertRaises(ShapeMismatch):
      Spectrogram(np.zeros((257, 2)), 128) + Spectrogram(np.zeros((257, 9)), 1024)

  def test_custom_config(self):
    cfg = StftConfig(frame_len=256, hop=64)
    clip = self.random_clip(3000)
    spec = stft(clip, cfg)
    self.assertEqual(spec.shape, (129, 1 + 3000 // 64))
    self.assertLessEqual(np.max(np.abs(istft(spec).samples - clip.samples)), 1e-6)
