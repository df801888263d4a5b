import json
import os

import pytest

from cli.main import get_parser, main
from cli.output import ResultWriter
from core.errors import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK

SMALL_DISKS = """
id = small-disks
geometry.family = ball
geometry.radius = 1.0
geometry.R0 = 0.5
geometry.kappa = 1.0
geometry.dimension = 2
boundary.family = linear
boundary.direction = 1, 0
numerics.lateral_cells = 32
numerics.vertical_cells = 8
numerics.tol = 1e-10
sweep.epsilons = 4e-2, 2e-2, 1e-2, 5e-3
sweep.fit = global
"""

SMALL_LAYERS = """
id = small-layers
boundary.family = linear
boundary.direction = 1, 0
layers.counts = 2, 4
layers.seeds = 0
layers.cells = 16
layers.points_per_axis = 8
acceptance.layer_ratio_max = 100
"""


def body(path, drop=('wall_time_s',)):
    """CSV body without metadata lines or the listed columns."""
    with open(path) as handle:
        lines = [line.rstrip('\n').split(',') for line in handle if not line.startswith('#')]
    keep = [i for i, name in enumerate(lines[0]) if name not in drop]
    return [[row[i] for i in keep] for row in lines]


class TestArguments:

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            get_parser().parse_args(['plot'])

    def test_defaults(self):
        args = get_parser().parse_args(['validate'])
        assert args.config is None
        assert not args.serial and not args.debug_dump and not args.flip_mixed_sign


class TestExitCodes:

    def test_missing_config(self, out_dir):
        assert main(['sweep', '--out', out_dir]) == EXIT_CONFIG

    def test_unreadable_config(self, out_dir, tmp_path):
        assert main(['solve', '--config', str(tmp_path / 'absent.cfg'), '--out', out_dir]) == EXIT_CONFIG

    def test_unknown_key(self, out_dir, write_scenario):
        path = write_scenario(SMALL_DISKS + "numerics.smoother = gauss\n")
        assert main(['solve', '--config', path, '--out', out_dir]) == EXIT_CONFIG

    def test_fit_without_sweep_results(self, out_dir, write_scenario):
        path = write_scenario(SMALL_DISKS)
        assert main(['fit', '--config', path, '--out', out_dir]) == EXIT_NUMERICAL

    def test_report_with_missing_results(self, out_dir, write_scenario):
        path = write_scenario(SMALL_DISKS + "acceptance.min_r_squared = 0.99\n")
        assert main(['report', '--config', path, '--out', out_dir]) == EXIT_ACCEPTANCE

        with open(os.path.join(out_dir, 'report.json')) as handle:
            report = json.load(handle)
        assert report['passed'] is False
        assert report['checks'][0]['detail'] == "fit.csv missing"


class TestSolve:

    def test_writes_solve_table(self, out_dir, write_scenario):
        path = write_scenario(SMALL_DISKS)
        assert main(['solve', '--config', path, '--out', out_dir, '--serial']) == EXIT_OK

        writer = ResultWriter(out_dir)
        rows = writer.read_csv('solve.csv')
        assert len(rows) == 1
        assert float(rows[0]['epsilon']) == 4e-2
        assert rows[0]['grid_shape'] == '33x9'
        assert int(rows[0]['unknowns']) == 33 * 9
        assert float(rows[0]['final_residual']) <= 1e-10
        assert writer.read_metadata('solve.csv')['scenario_id'] == 'small-disks'

    def test_debug_dump(self, out_dir, write_scenario):
        path = write_scenario(SMALL_DISKS)
        assert main(['solve', '--config', path, '--out', out_dir, '--serial', '--debug-dump']) == EXIT_OK
        assert os.path.exists(os.path.join(out_dir, 'debug', 'eps_0.04.txt'))
        assert os.path.exists(os.path.join(out_dir, 'debug', 'eps_0.04.data.bin'))


class TestSweep:

    def test_sweep_then_fit(self, out_dir, write_scenario):
        path = write_scenario(SMALL_DISKS)
        assert main(['sweep', '--config', path, '--out', out_dir, '--serial']) == EXIT_OK

        writer = ResultWriter(out_dir)
        epsilons = [float(r['epsilon']) for r in writer.read_csv('sweep.csv')]
        assert epsilons == [4e-2, 2e-2, 1e-2, 5e-3]
        assert len(writer.read_csv('theorem.csv')) == 4
        slope = float(writer.read_csv('fit.csv')[0]['slope'])

        assert main(['fit', '--config', path, '--out', out_dir]) == EXIT_OK
        assert float(writer.read_csv('fit.csv')[0]['slope']) == pytest.approx(slope, rel=1e-9)

    def test_results_independent_of_worker_count(self, tmp_path, write_scenario):
        path = write_scenario(SMALL_DISKS)
        serial, threaded = str(tmp_path / 'serial'), str(tmp_path / 'threaded')
        assert main(['sweep', '--config', path, '--out', serial, '--serial']) == EXIT_OK
        assert main(['sweep', '--config', path, '--out', threaded]) == EXIT_OK

        for name in ('sweep.csv', 'fit.csv', 'theorem.csv'):
            assert body(os.path.join(serial, name)) == body(os.path.join(threaded, name))


class TestLayers:

    def test_layers_and_report(self, out_dir, write_scenario):
        path = write_scenario(SMALL_LAYERS)
        assert main(['layers', '--config', path, '--out', out_dir, '--serial']) == EXIT_OK

        rows = ResultWriter(out_dir).read_csv('layers.csv')
        assert [(r['l'], r['seed']) for r in rows] == [('2', '0'), ('4', '0')]

        assert main(['report', '--config', path, '--out', out_dir]) == EXIT_OK
        with open(os.path.join(out_dir, 'report.json')) as handle:
            assert json.load(handle)['passed'] is True

    def test_growth_bound_enforced(self, out_dir, write_scenario):
        path = write_scenario(SMALL_LAYERS.replace("layer_ratio_max = 100", "layer_ratio_max = 1e-6"))
        assert main(['layers', '--config', path, '--out', out_dir, '--serial']) == EXIT_ACCEPTANCE


@pytest.mark.slow
class TestValidate:

    def test_builtin_properties_pass(self, out_dir):
        assert main(['validate', '--out', out_dir]) == EXIT_OK
        rows = ResultWriter(out_dir).read_csv('validate.csv')
        assert all(r['passed'] == 'true' for r in rows)

    def test_flipped_mixed_sign_fails(self, out_dir):
        assert main(['validate', '--out', out_dir, '--flip-mixed-sign']) == EXIT_ACCEPTANCE
        failed = {r['property'] for r in ResultWriter(out_dir).read_csv('validate.csv') if r['passed'] == 'false'}
        assert 'pushforward_fd' in failed


@pytest.mark.slow
class TestShippedScenarios:

    @pytest.mark.parametrize("name", ['disks2d', 'balls3d', 'quad3d-iso', 'quad3d-aniso'])
    def test_sweep_and_report(self, name, tmp_path):
        path = os.path.join(os.path.dirname(__file__), '..', 'scenarios', f'{name}.cfg')
        out = str(tmp_path / name)
        assert main(['sweep', '--config', path, '--out', out]) == EXIT_OK
        if name == 'balls3d':
            assert main(['harnack', '--config', path, '--out', out]) == EXIT_OK
        assert main(['report', '--config', path, '--out', out]) == EXIT_OK

    def test_layered(self, tmp_path):
        path = os.path.join(os.path.dirname(__file__), '..', 'scenarios', 'layered.cfg')
        out = str(tmp_path / 'layered')
        assert main(['layers', '--config', path, '--out', out]) == EXIT_OK
        assert main(['report', '--config', path, '--out', out]) == EXIT_OK
