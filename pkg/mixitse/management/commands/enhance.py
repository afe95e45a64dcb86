import logging
import os
from concurrent.futures import ThreadPoolExecutor

from django.conf import settings

from mixitse.audio_io import read_wav, write_wav
from mixitse.checkpoint import load_checkpoint, load_sidecar
from mixitse.config import ModelConfig, RunConfig, StftConfig
from mixitse.exceptions import IoFailure
from mixitse.management.base import MixitCommand
from mixitse.postproc import enhance_clip, remix

logger = logging.getLogger(__name__)


def wav_jobs(source, out_dir):
  """(input, output) pairs; a directory is mirrored file for file under out_dir."""
  if os.path.isfile(source):
    return [(source, os.path.join(out_dir, os.path.basename(source)))]
  jobs = []
  for dirpath, dirnames, filenames in os.walk(source):
    for name in filenames:
      if name.lower().endswith('.wav'):
        path = os.path.join(dirpath, name)
        jobs.append((path, os.path.join(out_dir, os.path.relpath(path, source))))
  return sorted(jobs)


class Command(MixitCommand):
  help = 'Enhance a WAV file or every WAV under a directory with a trained checkpoint.'

  def add_arguments(self, parser):
    parser.add_argument('checkpoint', help='MXC1 checkpoint with its JSON sidecar')
    parser.add_argument('input', help='WAV file or directory of WAV files')
    parser.add_argument('out_dir')
    parser.add_argument(
      '--remix-beta', type=float, default=None, metavar='DB',
      help='remix the enhanced output with the unprocessed input at this SNR in dB')
    parser.add_argument('--config', default=None, help='RunConfig whose remix.beta_db applies when --remix-beta is absent')

  def run(self, checkpoint, input, out_dir, remix_beta=None, config=None, **options):
    self.require_file(checkpoint)
    self.require_path(input)
    sidecar = load_sidecar(checkpoint)
    if sidecar is None:
      self.usage('checkpoint %s has no JSON sidecar describing its model' % checkpoint)
    model_cfg = ModelConfig.from_dict(sidecar.get('model'))
    stft_cfg = StftConfig.from_dict(sidecar.get('stft'))
    if remix_beta is None and config is not None:
      remix_beta = RunConfig.load(self.require_file(config)).remix.beta_db
    params = load_checkpoint(checkpoint)

    def _enhance(job):
      source, target = job
      noisy = read_wav(source)
      enhanced = enhance_clip(params, noisy, model_cfg, stft_cfg)
      if remix_beta is not None:
        enhanced = remix(enhanced, noisy, remix_beta)
      try:
        os.makedirs(os.path.dirname(target) or '.', exist_ok=True)
      except OSError as ex:
        raise IoFailure('cannot create %s: %s' % (os.path.dirname(target), ex))
      write_wav(enhanced, target)
      logger.debug('Enhanced %s -> %s', source, target)
      return target

    jobs = wav_jobs(input, out_dir)
    with ThreadPoolExecutor(max_workers=max(1, settings.MIXITSE_WORKERS)) as pool:
      written = list(pool.map(_enhance, jobs))
    self.stdout.write('Enhanced %d file(s) into %s' % (len(written), out_dir))
