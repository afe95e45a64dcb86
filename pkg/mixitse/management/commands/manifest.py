from mixitse.audio_io import KINDS, build_manifest
from mixitse.management.base import MixitCommand


class Command(MixitCommand):
  help = 'Scan a directory for 16 kHz mono PCM WAV files and write a JSON-lines manifest.'

  def add_arguments(self, parser):
    parser.add_argument('root', help='directory to scan recursively')
    parser.add_argument('--kind', choices=KINDS, required=True, help='corpus role of every file found')
    parser.add_argument('--out', required=True, help='manifest path to write')

  def run(self, root, kind, out, **options):
    self.require_dir(root)
    manifest = build_manifest(root, kind)
    manifest.save(out)
    self.stdout.write('Wrote %d %s entries to %s' % (len(manifest), kind, out))
    if manifest.skipped:
      self.stderr.write('%d skipped' % manifest.skipped)
