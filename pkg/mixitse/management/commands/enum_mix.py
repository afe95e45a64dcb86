import simplejson as json

from mixitse.exceptions import ConfigError, UnsupportedOutputs
from mixitse.management.base import MixitCommand
from mixitse.mixit_loss import enumerate_allowed


class Command(MixitCommand):
  help = 'Print the admissible mixing matrices for M network outputs, one JSON array per line.'
  usage_errors = (ConfigError, UnsupportedOutputs)

  def add_arguments(self, parser):
    parser.add_argument('num_outputs', type=int, metavar='M')

  def run(self, num_outputs, **options):
    for matrix in enumerate_allowed(num_outputs):
      self.stdout.write(json.dumps(matrix.to_list()))
