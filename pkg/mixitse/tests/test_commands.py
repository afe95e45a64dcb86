import csv
import filecmp
import os
from io import StringIO

import simplejson as json
from django.core.management import call_command
from django.core.management.base import CommandError

from mixitse.audio_io import AudioClip, Manifest, read_wav, write_wav
from mixitse.checkpoint import save_checkpoint
from mixitse.config import ModelConfig, StftConfig
from mixitse.enh_model import init_params
from mixitse.postproc import enhance_clip, remix, snr_db
from mixitse.tests.mixit_test_case import MixitTestCase


class CommandTestCase(MixitTestCase):
  def call(self, name, *args, **options):
    out, err = StringIO(), StringIO()
    call_command(name, *args, stdout=out, stderr=err, **options)
    return out.getvalue(), err.getvalue()

  def assertExitCode(self, code, name, *args, **options):
    with self.assertRaises(CommandError) as raised:
      self.call(name, *args, **options)
    self.assertEqual(raised.exception.returncode, code)
    return raised.exception


class ManifestCommandTestCase(CommandTestCase):
  def test_writes_manifest(self):
    for index in range(3):
      self.write_clip(self.random_clip(8000, seed=index), 'clean', 'clip_%d.wav' % index)
    out, err = self.call('manifest', self.path('clean'), kind='clean', out=self.path('clean.jsonl'))
    self.assertIn('Wrote 3 clean entries', out)
    self.assertEqual(err, '')
    manifest = Manifest.load(self.path('clean.jsonl'))
    self.assertEqual([entry.duration_s for entry in manifest], [0.5, 0.5, 0.5])

  def test_reports_skipped_files(self):
    self.write_clip(self.random_clip(8000), 'noise', 'good.wav')
    with open(self.path('noise', 'bad.wav'), 'wb') as handle:
      handle.write(b'definitely not RIFF')
    out, err = self.call('manifest', self.path('noise'), kind='noise', out=self.path('noise.jsonl'))
    self.assertIn('Wrote 1 noise entries', out)
    self.assertIn('1 skipped', err)

  def test_missing_directory(self):
    self.assertExitCode(2, 'manifest', self.path('nowhere'), kind='clean', out=self.path('x.jsonl'))
    self.assertFalse(os.path.exists(self.path('x.jsonl')))


class SimulateCommandTestCase(CommandTestCase):
  def test_counts(self):
    self.call('simulate', self.path('corpus'), clean=2, noise=1, noisy=0, seed=3)
    self.assertEqual(len(Manifest.load(self.path('corpus', 'clean.jsonl'))), 2)
    self.assertEqual(len(Manifest.load(self.path('corpus', 'noise.jsonl'))), 1)
    self.assertEqual(len(Manifest.load(self.path('corpus', 'noisy.jsonl'))), 0)

  def test_same_seed_same_audio(self):
    self.call('simulate', self.path('a'), clean=1, noise=1, noisy=1, seed=7)
    self.call('simulate', self.path('b'), clean=1, noise=1, noisy=1, seed=7)
    for kind in ('clean', 'noise', 'noisy'):
      self.assertTrue(filecmp.cmp(
        self.path('a', kind, '%s_0000.wav' % kind), self.path('b', kind, '%s_0000.wav' % kind), shallow=False))

  def test_validation_pools(self):
    self.call('simulate', self.path('corpus'), clean=1, noise=1, noisy=0, seed=3, val=2)
    self.assertEqual(len(Manifest.load(self.path('corpus', 'val_clean.jsonl'))), 2)
    self.assertEqual(len(Manifest.load(self.path('corpus', 'val_noise.jsonl'))), 2)

  def test_negative_count(self):
    self.assertExitCode(2, 'simulate', self.path('corpus'), clean=-1)


class EnumMixCommandTestCase(CommandTestCase):
  def test_three_outputs(self):
    out, _ = self.call('enum_mix', '3')
    self.assertEqual(
      [json.loads(line) for line in out.splitlines()],
      [[[1, 0, 0], [0, 1, 1]], [[1, 1, 0], [0, 0, 1]], [[1, 0, 1], [0, 1, 0]]])

  def test_two_outputs(self):
    out, _ = self.call('enum_mix', '2')
    self.assertEqual([json.loads(line) for line in out.splitlines()], [[[1, 0], [0, 1]]])

  def test_unsupported(self):
    error = self.assertExitCode(2, 'enum_mix', '5')
    self.assertIn('UnsupportedOutputs', str(error))


class GradcheckCommandTestCase(CommandTestCase):
  def test_passes_and_repeats(self):
    first, _ = self.call('gradcheck', probes=2)
    second, _ = self.call('gradcheck', probes=2)
    self.assertEqual(first, second)
    self.assertIn('probed', first)
    self.assertIn('max relative error', first)

  def test_corrupted_gradient_fails(self):
    self.assertExitCode(1, 'gradcheck', probes=2, corrupt_grad=True)

  def test_probe_count_must_be_positive(self):
    self.assertExitCode(2, 'gradcheck', probes=0)


class TrainCommandTestCase(CommandTestCase):
  def test_tiny_run(self):
    config = self.write_run_config(self.tiny_run_config())
    out, _ = self.call('train', config, self.path('run'))
    self.assertIn('Best checkpoint', out)
    for name in ('resolved_config.json', 'metrics.jsonl', 'best.json'):
      self.assertTrue(os.path.isfile(self.path('run', name)))
    self.assertTrue(os.path.isfile(self.path('run', 'checkpoints', 'epoch_001.mxc')))

  def test_seed_override(self):
    config = self.write_run_config(self.tiny_run_config())
    self.call('train', config, self.path('run'), seed=11)
    with open(self.path('run', 'resolved_config.json')) as handle:
      resolved = json.load(handle)
    self.assertEqual(resolved['train']['seed'], 11)
    self.assertEqual(resolved['sampler']['seed'], 11)

  def test_noisy_only(self):
    run_cfg = self.tiny_run_config()
    run_cfg = run_cfg.replace(sampler=run_cfg.sampler.replace(clean_ratio=0.0))
    out, _ = self.call('train', self.write_run_config(run_cfg), self.path('run'))
    self.assertIn('Best checkpoint', out)

  def test_unknown_key(self):
    with open(self.path('bad.json'), 'w') as handle:
      handle.write(json.dumps({'train': {'learning_rate': 0.1}}))
    error = self.assertExitCode(2, 'train', self.path('bad.json'), self.path('run'))
    self.assertIn('learning_rate', str(error))

  def test_invalid_json(self):
    with open(self.path('bad.json'), 'w') as handle:
      handle.write('{"train": ')
    self.assertExitCode(2, 'train', self.path('bad.json'), self.path('run'))

  def test_missing_config(self):
    self.assertExitCode(2, 'train', self.path('nope.json'), self.path('run'))

  def test_missing_manifest(self):
    run_cfg = self.tiny_run_config()
    run_cfg = run_cfg.replace(manifests=run_cfg.manifests.replace(noisy=self.path('gone.jsonl')))
    self.assertExitCode(2, 'train', self.write_run_config(run_cfg), self.path('run'))


class SweepCommandTestCase(CommandTestCase):
  def test_sweep_table(self):
    config = self.write_run_config(self.tiny_run_config(steps_per_epoch=1))
    self.call('sweep', config, self.path('sweep'), field='max_noisy', values=['1', 'all'])
    with open(self.path('sweep', 'sweep.csv')) as handle:
      rows = list(csv.reader(handle))
    self.assertEqual(rows[0], ['value', 'best_epoch', 'best_val_snri_db', 'best_checkpoint'])
    self.assertEqual([row[0] for row in rows[1:]], ['1', ''])
    self.assertTrue(os.path.isdir(self.path('sweep', 'max_noisy_None')))


class EnhanceCommandTestCase(CommandTestCase):
  def setUp(self):
    super(EnhanceCommandTestCase, self).setUp()
    self.model_cfg = ModelConfig.tiny()
    self.params = init_params(self.model_cfg, 0)
    self.checkpoint = save_checkpoint(self.params, self.path('model.mxc'), {
      'model': self.model_cfg.to_dict(),
      'stft': StftConfig().to_dict(),
    })

  def expected(self, source, beta=None, name='expected.wav'):
    noisy = read_wav(source)
    enhanced = enhance_clip(self.params, noisy, self.model_cfg)
    if beta is not None:
      enhanced = remix(enhanced, noisy, beta)
    write_wav(enhanced, self.path(name))
    return self.path(name)

  def test_single_file(self):
    source = self.write_clip(self.random_clip(5000), 'in', 'a.wav')
    out, _ = self.call('enhance', self.checkpoint, source, self.path('out'))
    self.assertIn('Enhanced 1 file(s)', out)
    self.assertEqual(len(read_wav(self.path('out', 'a.wav'))), 5000)
    self.assertTrue(filecmp.cmp(self.path('out', 'a.wav'), self.expected(source), shallow=False))

  def test_directory_is_mirrored(self):
    self.write_clip(self.random_clip(3000, seed=1), 'in', 'a.wav')
    self.write_clip(self.random_clip(4000, seed=2), 'in', 'sub', 'b.wav')
    out, _ = self.call('enhance', self.checkpoint, self.path('in'), self.path('out'))
    self.assertIn('Enhanced 2 file(s)', out)
    self.assertEqual(len(read_wav(self.path('out', 'a.wav'))), 3000)
    self.assertEqual(len(read_wav(self.path('out', 'sub', 'b.wav'))), 4000)

  def test_remix(self):
    source = self.write_clip(self.random_clip(5000), 'in', 'a.wav')
    self.call('enhance', self.checkpoint, source, self.path('out'), remix_beta=0.0)
    self.assertTrue(filecmp.cmp(self.path('out', 'a.wav'), self.expected(source, beta=0.0), shallow=False))

  def test_missing_sidecar(self):
    save_checkpoint(self.params, self.path('bare.mxc'))
    source = self.write_clip(self.random_clip(5000), 'in', 'a.wav')
    self.assertExitCode(2, 'enhance', self.path('bare.mxc'), source, self.path('out'))

  def test_missing_input(self):
    self.assertExitCode(2, 'enhance', self.checkpoint, self.path('nothing.wav'), self.path('out'))


class EvalSnrCommandTestCase(CommandTestCase):
  def setUp(self):
    super(EvalSnrCommandTestCase, self).setUp()
    self.clean = [self.random_clip(4000, seed=index) for index in range(2)]
    self.manifest = self.write_manifest('clean', self.clean)
    for index, clip in enumerate(self.clean):
      noise = self.random_clip(4000, seed=10 + index, scale=0.1)
      self.write_clip(AudioClip(clip.samples + noise.samples), 'noisy', 'clean_%02d.wav' % index)

  def report(self, processed_dir):
    self.call('eval_snr', self.manifest, processed_dir, self.path('noisy'), out=self.path('report.csv'))
    with open(self.path('report.csv')) as handle:
      return list(csv.reader(handle))

  def test_unprocessed_scores_zero(self):
    rows = self.report(self.path('noisy'))
    self.assertEqual(rows[0], ['path', 'snr_in_db', 'snr_out_db', 'snri_db'])
    self.assertEqual(len(rows), 3)
    for row in rows[1:]:
      self.assertEqual(float(row[3]), 0.0)

  def test_perfect_output(self):
    rows = self.report(self.path('clean'))
    for index, row in enumerate(rows[1:]):
      clean = read_wav(self.path('clean', 'clean_%02d.wav' % index))
      snr_in = snr_db(clean, read_wav(self.path('noisy', 'clean_%02d.wav' % index)))
      self.assertEqual(row[0], os.path.join('clean', 'clean_%02d.wav' % index))
      self.assertEqual(float(row[2]), 100.0)
      self.assertAlmostEqual(float(row[3]), 100.0 - snr_in, places=9)

  def test_default_report_path(self):
    self.call('eval_snr', self.manifest, self.path('noisy'), self.path('noisy'))
    self.assertTrue(os.path.isfile(self.path('noisy', 'snr_report.csv')))

  def test_missing_processed_dir(self):
    self.assertExitCode(2, 'eval_snr', self.manifest, self.path('absent'), self.path('noisy'))
