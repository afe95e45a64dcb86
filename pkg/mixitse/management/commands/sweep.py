from mixitse.config import RunConfig
from mixitse.management.base import MixitCommand
from mixitse.management.commands.train import require_manifests, with_seed
from mixitse.trainer import SWEEP_FIELDS, sweep


def parse_value(field, text):
  if text.lower() in ('all', 'null', 'none'):
    return None
  try:
    return float(text) if field == 'clean_ratio' else int(text)
  except ValueError:
    return text


class Command(MixitCommand):
  help = 'Train one model per value of a sampler field and tabulate the best validation SNRi of each.'

  def add_arguments(self, parser):
    parser.add_argument('config')
    parser.add_argument('out_dir')
    parser.add_argument('--field', choices=SWEEP_FIELDS, required=True)
    parser.add_argument(
      '--values', nargs='+', required=True,
      help='values for the field; "all" means no truncation for max_clean / max_noisy')
    parser.add_argument('--seed', type=int, default=None, help='overrides train.seed and sampler.seed')

  def run(self, config, out_dir, field, values, seed=None, **options):
    self.require_file(config)
    run_cfg = with_seed(RunConfig.load(config), seed)
    require_manifests(self, run_cfg)
    path, results = sweep(run_cfg, field, [parse_value(field, value) for value in values], out_dir)
    for value, result in results:
      self.stdout.write('%s=%s: best epoch %s, val SNRi %s' % (field, value, result.best_epoch, result.best_snri))
    self.stdout.write('Sweep table: %s' % path)
