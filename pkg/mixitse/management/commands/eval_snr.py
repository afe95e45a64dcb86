import csv
import os

from mixitse.audio_io import Manifest, read_wav
from mixitse.exceptions import IoFailure
from mixitse.management.base import MixitCommand
from mixitse.postproc import snr_db

HEADER = ['path', 'snr_in_db', 'snr_out_db', 'snri_db']


def snr_rows(manifest, processed_dir, noisy_dir, relative_to):
  """One row per clean entry, matched by file name in the processed and noisy directories."""
  rows = []
  for entry in manifest:
    name = os.path.basename(entry.path)
    clean = read_wav(entry.path)
    snr_in = snr_db(clean, read_wav(os.path.join(noisy_dir, name)))
    snr_out = snr_db(clean, read_wav(os.path.join(processed_dir, name)))
    rows.append([os.path.relpath(entry.path, relative_to), snr_in, snr_out, snr_out - snr_in])
  return rows


class Command(MixitCommand):
  help = 'Score processed files against clean references and write a CSV SNR report.'

  def add_arguments(self, parser):
    parser.add_argument('clean_manifest')
    parser.add_argument('processed_dir')
    parser.add_argument('noisy_dir')
    parser.add_argument('--out', default=None, help='CSV path (default <processed_dir>/snr_report.csv)')

  def run(self, clean_manifest, processed_dir, noisy_dir, out=None, **options):
    self.require_file(clean_manifest)
    self.require_dir(processed_dir)
    self.require_dir(noisy_dir)
    out = out or os.path.join(processed_dir, 'snr_report.csv')

    manifest = Manifest.load(clean_manifest)
    rows = snr_rows(manifest, processed_dir, noisy_dir, os.path.dirname(os.path.abspath(clean_manifest)))
    try:
      with open(out, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(HEADER)
        writer.writerows(rows)
    except OSError as ex:
      raise IoFailure('cannot write %s: %s' % (out, ex))

    if rows:
      mean = sum(row[3] for row in rows) / len(rows)
      self.stdout.write('Mean SNRi over %d file(s): %.2f dB' % (len(rows), mean))
    self.stdout.write('Report: %s' % out)
