import numpy as np

from mixitse.audio_io import AudioClip
from mixitse.config import ModelConfig
from mixitse.enh_model import init_params
from mixitse.exceptions import ShapeMismatch, SilentEnhanced, SilentNoisy, SilentReference
from mixitse.mixer import snr_between
from mixitse.postproc import enhance_clip, remix, remix_gain, snr_db, snri_db
from mixitse.tests.mixit_test_case import MixitTestCase


class PostprocTestCase(MixitTestCase):
  def pair(self, seed=0, length=1000):
    rng = np.random.default_rng(seed)
    return AudioClip(rng.uniform(-1, 1, length)), AudioClip(rng.uniform(-1, 1, length))

  def test_equal_powers(self):
    enhanced = self.random_clip(1000, seed=1)
    noisy = AudioClip(-enhanced.samples[::-1])
    self.assertAlmostEqual(remix_gain(enhanced, noisy, 0.0), 1.0, places=12)
    self.assertAlmostEqual(remix_gain(enhanced, noisy, 10.0), 0.31623, places=5)
    np.testing.assert_allclose(remix(enhanced, noisy, 0.0).samples, enhanced.samples + noisy.samples, atol=1e-12)

  def test_remix_with_itself(self):
    enhanced = self.random_clip(500)
    np.testing.assert_allclose(remix(enhanced, enhanced, 0.0).samples, 2 * enhanced.samples, atol=1e-12)

  def test_internal_snr_matches_beta(self):
    for seed in range(100):
      enhanced, noisy = self.pair(seed)
      for beta in (0.0, 10.0):
        gain = remix_gain(enhanced, noisy, beta)
        self.assertAlmostEqual(snr_between(enhanced, AudioClip(gain * noisy.samples)), beta, delta=1e-6)

  def test_gain_decreases_with_beta(self):
    enhanced, noisy = self.pair(7)
    gains = [remix_gain(enhanced, noisy, beta) for beta in (-10.0, 0.0, 10.0, 20.0, 60.0)]
    self.assertTrue(all(a > b for a, b in zip(gains, gains[1:])))

  def test_high_beta_vanishes(self):
    enhanced, noisy = self.pair(3)
    gain = remix_gain(enhanced, noisy, 60.0)
    out = remix(enhanced, noisy, 60.0)
    bound = gain * np.max(np.abs(noisy.samples))
    self.assertLessEqual(np.max(np.abs(out.samples - enhanced.samples)), bound + 1e-15)
    self.assertLessEqual(bound, 1e-3 * np.max(np.abs(noisy.samples)) * np.sqrt(np.mean(enhanced.samples ** 2) / np.mean(noisy.samples ** 2)) + 1e-15)

  def test_remix_errors(self):
    enhanced, noisy = self.pair()
    silent = AudioClip(np.zeros(1000))
    with self.assertRaises(SilentEnhanced):
      remix(silent, noisy, 0.0)
    with self.assertRaises(SilentNoisy):
      remix(enhanced, silent, 0.0)
    with self.assertRaises(ShapeMismatch):
      remix(enhanced, AudioClip(noisy.samples[:10]), 0.0)

  def test_snr_db(self):
    ref = self.random_clip(2000, seed=2)
    self.assertEqual(snr_db(ref, ref), 100.0)
    error = 0.1 * np.roll(ref.samples, 7)
    self.assertAlmostEqual(snr_db(ref, AudioClip(ref.samples + error)), 20.0, places=9)
    self.assertAlmostEqual(snr_db(ref, AudioClip(2 * ref.samples)), 0.0, places=12)
    self.assertEqual(snr_db(ref, AudioClip(ref.samples + 1e9)), -100.0)
    with self.assertRaises(SilentReference):
      snr_db(AudioClip(np.zeros(10)), self.random_clip(10))

  def test_snri(self):
    clean = self.random_clip(2000, seed=5)
    noise = AudioClip(np.roll(clean.samples, 11))
    noisy = AudioClip(clean.samples + noise.samples)
    enhanced = AudioClip(clean.samples + 0.1 * noise.samples)
    self.assertAlmostEqual(snri_db(clean, enhanced, noisy), 20.0, places=9)
    self.assertEqual(snri_db(clean, noisy, noisy), 0.0)

  def test_enhance_clip_lengths(self):
    cfg = ModelConfig.tiny()
    params = init_params(cfg, 0)
    for length in (100, 640, 4000):
      clip = self.random_clip(length)
      enhanced = enhance_clip(params, clip, cfg)
      self.assertEqual(len(enhanced), length)
      self.assertTrue(np.all(np.isfinite(enhanced.samples)))

  def test_enhance_clip_silence(self):
    cfg = ModelConfig.tiny()
    enhanced = enhance_clip(init_params(cfg, 0), AudioClip(np.zeros(800)), cfg)
    self.assertFalse(np.any(enhanced.samples))

  def test_enhance_clip_is_scale_equivariant(self):
    cfg = ModelConfig.tiny()
    params = init_params(cfg, 0)
    clip = self.random_clip(2000)
    quiet = enhance_clip(params, clip, cfg)
    loud = enhance_clip(params, AudioClip(4 * clip.samples), cfg)
    np.testing.assert_allclose(loud.samples, 4 * quiet.samples, rtol=1e-9, atol=1e-12)
