from mixitse.corpus import gen_synth_corpus
from mixitse.management.base import MixitCommand


class Command(MixitCommand):
  help = 'Generate the synthetic clean / noise / noisy corpus and its manifests.'

  def add_arguments(self, parser):
    parser.add_argument('out_dir')
    parser.add_argument('--clean', type=int, default=200, help='number of clean clips (default 200)')
    parser.add_argument('--noise', type=int, default=200, help='number of noise clips (default 200)')
    parser.add_argument('--noisy', type=int, default=200, help='number of real-noisy clips (default 200)')
    parser.add_argument('--val', type=int, default=0, help='clips in each of the val_clean and val_noise pools (default 0)')
    parser.add_argument('--seed', type=int, default=0)

  def run(self, out_dir, clean, noise, noisy, seed, val, **options):
    for flag, count in (('--clean', clean), ('--noise', noise), ('--noisy', noisy), ('--val', val)):
      if count < 0:
        self.usage('%s must not be negative' % flag)
    for kind, path in sorted(gen_synth_corpus(out_dir, clean, noise, noisy, seed, n_val=val).items()):
      self.stdout.write('%s manifest: %s' % (kind, path))
