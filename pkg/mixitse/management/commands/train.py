from mixitse.config import RunConfig
from mixitse.management.base import MixitCommand
from mixitse.trainer import train_run


def with_seed(run_cfg, seed):
  """A single --seed drives both the initialisation and the sampler."""
  if seed is None:
    return run_cfg
  return run_cfg.replace(train=run_cfg.train.replace(seed=seed), sampler=run_cfg.sampler.replace(seed=seed))


def require_manifests(command, run_cfg):
  for path in run_cfg.manifests.to_dict().values():
    if path is not None:
      command.require_file(path)


class Command(MixitCommand):
  help = 'Train an enhancement model from a RunConfig JSON file.'

  def add_arguments(self, parser):
    parser.add_argument('config', help='RunConfig JSON; manifest paths are relative to its directory')
    parser.add_argument('out_dir', help='receives resolved_config.json, metrics.jsonl, best.json and checkpoints/')
    parser.add_argument('--seed', type=int, default=None, help='overrides train.seed and sampler.seed')

  def run(self, config, out_dir, seed=None, **options):
    self.require_file(config)
    run_cfg = with_seed(RunConfig.load(config), seed)
    require_manifests(self, run_cfg)
    result = train_run(run_cfg, out_dir)
    self.stdout.write('Best checkpoint: %s (epoch %d)' % (result.best_checkpoint, result.best_epoch))
    self.stdout.write('Metrics: %s' % result.metrics_path)
