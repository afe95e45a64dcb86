import logging
import os

from django.core.management.base import BaseCommand, CommandError

from mixitse.exceptions import ConfigError, MixitError

logger = logging.getLogger(__name__)

USAGE_EXIT = 2
FAILURE_EXIT = 1


class MixitCommand(BaseCommand):
  """
  Base for the toolkit's commands.

  Subclasses implement run(**options). Config and usage errors leave with exit
  status 2, every other toolkit error with 1.
  """
  usage_errors = (ConfigError,)

  def handle(self, *args, **options):
    try:
      self.run(*args, **options)
    except self.usage_errors as ex:
      raise CommandError('%s: %s' % (type(ex).__name__, ex), returncode=USAGE_EXIT)
    except MixitError as ex:
      logger.error('%s failed: %s: %s', self.name, type(ex).__name__, ex)
      raise CommandError('%s: %s' % (type(ex).__name__, ex), returncode=FAILURE_EXIT)

  @property
  def name(self):
    return self.__module__.rsplit('.', 1)[-1]

  def run(self, *args, **options):
    raise NotImplementedError

  def usage(self, message):
    raise CommandError(message, returncode=USAGE_EXIT)

  def require_file(self, path):
    if not os.path.isfile(path):
      self.usage('no such file: %s' % path)
    return path

  def require_dir(self, path):
    if not os.path.isdir(path):
      self.usage('no such directory: %s' % path)
    return path

  def require_path(self, path):
    if not os.path.exists(path):
      self.usage('no such file or directory: %s' % path)
    return path
