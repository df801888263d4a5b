import glob
import os

import numpy as np
import pytest

from cli.output import ResultWriter
from cli.scenario import load_scenario, parse_scenario_text, scenario_from_text, unknown_keys
from core.errors import EXIT_CONFIG, ConfigurationError, GapfieldError
from core.protocol import FitTarget, PreconditionerKind

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), '..', 'scenarios')

BASE = """
id = tiny
description = small disk gap, for tests
geometry.family = ball
geometry.R0 = 0.5
geometry.kappa = 1.0
geometry.dimension = 2
geometry.epsilon = 0.01
"""


class TestParsing:

    def test_atoms_and_lists(self):
        data = parse_scenario_text(
            "id = x  # trailing comment\n"
            "numerics.lateral_cells = 64\n"
            "numerics.tol = 1e-8\n"
            "sweep.epsilons = 4e-2, 2e-2\n"
            "harnack.epsilons = 1e-2\n"
        )
        assert data['id'] == 'x'
        assert data['numerics'] == {'lateral_cells': 64, 'tol': 1e-8}
        assert data['sweep']['epsilons'] == [4e-2, 2e-2]
        assert data['harnack']['epsilons'] == [1e-2]

    def test_description_keeps_commas(self):
        scenario = scenario_from_text(BASE)
        assert scenario.description == "small disk gap, for tests"

    @pytest.mark.parametrize("line", ["geometry.family ball", "= 1", "a.b.c = 1", "foo = 1"])
    def test_malformed_lines(self, line):
        with pytest.raises(ConfigurationError):
            parse_scenario_text(line)

    def test_duplicate_key(self):
        with pytest.raises(ConfigurationError) as info:
            parse_scenario_text("id = a\nid = b\n")
        assert info.value.keys == ['id']

    def test_unknown_keys_listed(self):
        data = parse_scenario_text("id = a\ngeometry.colour = red\nplot.size = 3\n")
        assert unknown_keys(data) == ['geometry.colour', 'plot.size']


class TestValidation:

    def test_minimal_scenario(self):
        scenario = scenario_from_text(BASE)
        assert scenario.dimension == 2
        assert scenario.solve_epsilon == 0.01
        assert scenario.numerics.preconditioner == PreconditionerKind.LINE
        assert np.array_equal(scenario.x0('sweep'), [0.0])

    def test_unknown_key_is_a_configuration_error(self):
        with pytest.raises(ConfigurationError) as info:
            scenario_from_text(BASE + "geometry.colour = red\n")
        assert info.value.keys == ['geometry.colour']
        assert info.value.exit_code == EXIT_CONFIG

    @pytest.mark.parametrize("epsilons", ["4e-2, 2e-2, 1e-2", "1e-2, 2e-2, 5e-3, 2.5e-3", "4e-2, 2e-2, 0, -1e-3"])
    def test_sweep_epsilons(self, epsilons):
        with pytest.raises(ConfigurationError):
            scenario_from_text(BASE + f"sweep.epsilons = {epsilons}\n")

    def test_sweep_defaults(self):
        scenario = scenario_from_text(BASE + "sweep.epsilons = 4e-2, 2e-2, 1e-2, 5e-3\n")
        assert scenario.sweep.fit == FitTarget.GLOBAL
        assert scenario.solve_epsilon == 4e-2

    def test_x0_length(self):
        with pytest.raises(ConfigurationError):
            scenario_from_text(BASE + "harnack.epsilons = 1e-2\nharnack.x0 = 0, 0\n")

    def test_r0_beyond_ball(self):
        with pytest.raises(ConfigurationError):
            scenario_from_text(BASE.replace("geometry.R0 = 0.5", "geometry.R0 = 1.5"))

    def test_indefinite_quadratic(self):
        text = BASE.replace("geometry.family = ball", "geometry.family = quadratic")
        text = text.replace("geometry.dimension = 2", "geometry.Q = 1, 0, 0, -1")
        with pytest.raises(ConfigurationError):
            scenario_from_text(text)

    def test_harmonic_boundary_must_be_trace_free(self):
        with pytest.raises(ConfigurationError) as info:
            scenario_from_text(BASE + "boundary.family = harmonic\nboundary.matrix = 1, 0, 0, 0\n")
        assert info.value.keys == ['boundary.matrix']

    def test_declared_bounds_must_contain_coefficient(self):
        with pytest.raises(ConfigurationError):
            scenario_from_text(BASE + "coefficient.family = smooth\ncoefficient.amplitude = 0.2\n")

        scenario = scenario_from_text(BASE + "coefficient.family = smooth\ncoefficient.amplitude = 0.2\n"
                                             "coefficient.lambda = 0.8\ncoefficient.Lambda = 1.2\n")
        assert scenario.build_coefficient().lam == pytest.approx(0.8)

    def test_sweep_without_geometry(self):
        with pytest.raises(ConfigurationError):
            scenario_from_text("id = x\nsweep.epsilons = 4e-2, 2e-2, 1e-2, 5e-3\n")

    def test_layers_counts_sorted(self):
        scenario = scenario_from_text("id = x\nlayers.counts = 8, 2, 4, 2\nlayers.seeds = 0\n")
        assert scenario.layers.counts == [2, 4, 8]
        assert scenario.layers.seeds == [0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as info:
            load_scenario(str(tmp_path / "absent.cfg"))
        assert info.value.keys == ['--config']


class TestShippedScenarios:

    @pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(SCENARIO_DIR, '*.cfg'))))
    def test_loads(self, path):
        scenario = load_scenario(path)
        assert scenario.id == os.path.splitext(os.path.basename(path))[0]

    def test_all_present(self):
        names = {os.path.basename(p) for p in glob.glob(os.path.join(SCENARIO_DIR, '*.cfg'))}
        assert {'disks2d.cfg', 'balls3d.cfg', 'quad3d-iso.cfg', 'quad3d-aniso.cfg', 'layered.cfg'} <= names


class TestResultWriter:

    def test_metadata_stays_out_of_the_body(self, out_dir):
        writer = ResultWriter(out_dir)
        writer.write_csv('table.csv', ['a', 'b'], [['1', 'x'], ['2', 'y']], metadata={'scenario_id': 'tiny'})
        assert writer.read_csv('table.csv') == [{'a': '1', 'b': 'x'}, {'a': '2', 'b': 'y'}]
        assert writer.read_metadata('table.csv')['scenario_id'] == 'tiny'

    def test_missing_table(self, out_dir):
        with pytest.raises(GapfieldError):
            ResultWriter(out_dir).read_csv('sweep.csv')

    def test_report_schema_enforced(self, out_dir):
        writer = ResultWriter(out_dir)
        with pytest.raises(GapfieldError):
            writer.write_report({'scenario_id': 'tiny', 'passed': True})
        assert not writer.exists('report.json')
