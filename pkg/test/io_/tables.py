import os
import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..')))
import rallykit
from rallykit._helpers import InsufficientDataError
import hashlib
import tempfile
import numpy as np

def run():
    with tempfile.TemporaryDirectory() as root:
        rows = [
            {'lap': 1, 't_start': 0.0, 't_end': 11.123456789012345, 'lap_time': 11.123456789012345, 'off_track': 0},
            {'lap': 2, 't_start': 11.123456789012345, 't_end': np.float64(1 / 3 + 22), 'lap_time': np.float64(1 / 3 + 22) - 11.123456789012345, 'off_track': 1},
        ]
        path = os.path.join(root, 'laps.csv')
        rallykit.io.write_table(path, rows)
        read = rallykit.io.read_table(path)
        assert list(read[0]) == ['lap', 't_start', 't_end', 'lap_time', 'off_track']
        assert [float(r['t_end']) for r in read] == [float(r['t_end']) for r in rows]
        assert read[1]['off_track'] == '1'

        array = np.random.default_rng(51).normal(0, 1, (20, 4))
        path = os.path.join(root, 'estimate.csv')
        rallykit.io.write_array_table(path, ('t', 'V_x', 'V_y', 'r'), array)
        header, back = rallykit.io.read_array_table(path)
        assert header == ('t', 'V_x', 'V_y', 'r') and np.array_equal(back, array)
        path = os.path.join(root, 'none.csv')
        rallykit.io.write_array_table(path, ('t',), np.zeros((0, 1)))
        header, back = rallykit.io.read_array_table(path)
        assert header == ('t',) and back.shape == (0, 1)

        open(os.path.join(root, 'blank.csv'), 'w').close()
        try:
            rallykit.io.read_array_table(os.path.join(root, 'blank.csv'))
        except InsufficientDataError:
            pass
        else:
            raise AssertionError('empty table accepted')

        # manifests checksum the listed files and carry no timestamps
        manifest = rallykit.io.RunManifest(command='estimate', config_hash='0' * 64, seed=7, inputs={'sensors.jsonl': 'abc'})
        target = rallykit.io.write_manifest(root, manifest, ['laps.csv', 'estimate.csv'])
        with open(os.path.join(root, 'laps.csv'), 'rb') as fp:
            expected = hashlib.sha256(fp.read()).hexdigest()
        read = rallykit.io.read_manifest(target)
        assert read == manifest and read.files['laps.csv'] == expected
        assert set(vars(read)) == {'command', 'config_hash', 'seed', 'version', 'inputs', 'files'}
