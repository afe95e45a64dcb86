import os

import simplejson as json

from mixitse.config import ModelConfig, RunConfig, SamplerConfig, StftConfig, TrainConfig
from mixitse.exceptions import ConfigError
from mixitse.tests.mixit_test_case import MixitTestCase


class ConfigTestCase(MixitTestCase):
  def test_defaults(self):
    run_cfg = RunConfig.from_dict({})
    self.assertEqual(run_cfg.stft.frame_len, 512)
    self.assertEqual(run_cfg.stft.hop, 128)
    self.assertEqual(run_cfg.stft.num_bins, 257)
    self.assertEqual(run_cfg.model.num_outputs, 3)
    self.assertEqual(run_cfg.sampler.clean_ratio, 0.5)
    self.assertEqual(run_cfg.train.lr, 1e-3)
    self.assertEqual(run_cfg.train.loss_mode, 'per_term')
    self.assertIsNone(run_cfg.remix.beta_db)

  def test_model_shape_helpers(self):
    self.assertEqual(ModelConfig().dilations, [1, 2, 4, 8, 16, 32, 64])
    self.assertEqual(ModelConfig().min_frames, 65)
    self.assertEqual(ModelConfig.tiny().min_frames, 5)
    self.assertEqual(ModelConfig.tiny(num_outputs=2).num_outputs, 2)

  def test_unknown_keys(self):
    with self.assertRaisesMessage(ConfigError, 'unknown key "bogus" in section "train"'):
      RunConfig.from_dict({'train': {'bogus': 1}})
    with self.assertRaisesMessage(ConfigError, 'unknown key "extra" in run config'):
      RunConfig.from_dict({'extra': {}})

  def test_invalid_values(self):
    for section, values in (
        ('sampler', {'snr_low_db': 5, 'snr_high_db': -5}),
        ('sampler', {'clean_ratio': 1.5}),
        ('sampler', {'simu_target': 'reverb'}),
        ('sampler', {'max_noisy': -3}),
        ('train', {'lr': 0}),
        ('train', {'loss_mode': 'greedy'}),
        ('train', {'batch_size': True}),
        ('model', {'num_outputs': 1}),
        ('model', {'num_outputs': 4}),
        ('stft', {'hop': 100}),
        ('remix', {'beta_db': 'loud'})):
      with self.assertRaises(ConfigError):
        RunConfig.from_dict({section: values})

  def test_supervised_requires_clean_only(self):
    with self.assertRaises(ConfigError):
      RunConfig(train=TrainConfig(supervised=True))
    run_cfg = RunConfig(train=TrainConfig(supervised=True), sampler=SamplerConfig(clean_ratio=1.0))
    self.assertTrue(run_cfg.train.supervised)

  def test_load_resolves_manifests(self):
    os.makedirs(self.path('exp'))
    with open(self.path('exp', 'run.json'), 'w') as handle:
      handle.write(json.dumps({'manifests': {'clean': '../data/clean.jsonl'}, 'train': {'epochs': 3}}))
    run_cfg = RunConfig.load(self.path('exp', 'run.json'))
    self.assertEqual(run_cfg.manifests.clean, self.path('data', 'clean.jsonl'))
    self.assertIsNone(run_cfg.manifests.noisy)
    self.assertEqual(run_cfg.train.epochs, 3)

  def test_load_errors(self):
    with self.assertRaises(ConfigError):
      RunConfig.load(self.path('missing.json'))
    with open(self.path('broken.json'), 'w') as handle:
      handle.write('[1, 2')
    with self.assertRaises(ConfigError):
      RunConfig.load(self.path('broken.json'))
    with open(self.path('list.json'), 'w') as handle:
      handle.write('[]')
    with self.assertRaises(ConfigError):
      RunConfig.load(self.path('list.json'))

  def test_replace_and_json(self):
    run_cfg = RunConfig(model=ModelConfig.tiny())
    changed = run_cfg.replace(sampler=run_cfg.sampler.replace(seed=4))
    self.assertEqual(changed.sampler.seed, 4)
    self.assertEqual(run_cfg.sampler.seed, 0)
    self.assertEqual(RunConfig.from_dict(json.loads(changed.to_json())).to_dict(), changed.to_dict())
    self.assertNotEqual(StftConfig(), StftConfig(hop=256))

  def test_chunk_must_cover_the_receptive_field(self):
    with self.assertRaisesMessage(ConfigError, 'sampler.chunk_len gives 32 STFT frames, the model needs at least 65'):
      RunConfig(sampler=SamplerConfig(chunk_len=4000))
    self.assertEqual(RunConfig(model=ModelConfig.tiny(), sampler=SamplerConfig(chunk_len=4000)).model.min_frames, 5)
    self.assertEqual(RunConfig(sampler=SamplerConfig(chunk_len=8192)).sampler.chunk_len, 8192)
    with self.assertRaises(ConfigError):
      RunConfig(sampler=SamplerConfig(chunk_len=8191))
