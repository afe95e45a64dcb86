import argparse

from django.core.management.base import CommandError

from mixitse.config import ModelConfig
from mixitse.gradcheck import DEFAULT_PROBES, TOLERANCE, gradient_check
from mixitse.management.base import FAILURE_EXIT, MixitCommand


class Command(MixitCommand):
  help = 'Compare enhancement-network gradients with central finite differences.'

  def add_arguments(self, parser):
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument(
      '--tiny', action=argparse.BooleanOptionalAction, default=True,
      help='use the tiny model config (default); --no-tiny checks the full-size network')
    parser.add_argument('--probes', type=int, default=DEFAULT_PROBES, help='coordinates probed per parameter tensor')
    parser.add_argument('--corrupt-grad', action='store_true', help=argparse.SUPPRESS)

  def run(self, seed, tiny, probes, corrupt_grad=False, **options):
    if probes < 1:
      self.usage('--probes must be at least 1')
    model_cfg = ModelConfig.tiny() if tiny else ModelConfig()
    report = gradient_check(seed=seed, model_cfg=model_cfg, probes=probes, corrupt=corrupt_grad)
    name, worst = report.worst()
    self.stdout.write('probed %d coordinates' % report.probes)
    self.stdout.write('max relative error: %.6e (%s)' % (report.max_rel_error, name))
    if not report.passed:
      raise CommandError('max relative error %.3e exceeds %.0e' % (report.max_rel_error, TOLERANCE), returncode=FAILURE_EXIT)
