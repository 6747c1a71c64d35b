"""
Integration tests for the switchrad command line.

These tests drive every command through click's CliRunner and check the
data written to stdout, the exit codes and the files written with --out.
"""

import json
import os
import sys

import numpy as np
import pytest
from click.testing import CliRunner

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src import __version__
from src.main import cli
from tests.fixtures.matrix_sets import EXAMPLE4_PRODUCTS, example4_set, example8_set, rotation, write_matrix_file


@pytest.fixture
def runner():
    """CliRunner keeping stderr apart from the data on stdout."""
    return CliRunner(mix_stderr=False)


@pytest.fixture
def clean_env(mocker):
    """Remove every SWITCHRAD_* variable for the duration of a test."""
    env = {k: v for k, v in os.environ.items() if not k.startswith("SWITCHRAD_")}
    mocker.patch.dict(os.environ, env, clear=True)


@pytest.fixture
def example4_file(tmp_path):
    return write_matrix_file(tmp_path, "example4.json", example4_set().members)


@pytest.fixture
def example8_file(tmp_path):
    return write_matrix_file(tmp_path, "example8.json", example8_set().members)


@pytest.fixture
def system_file(tmp_path):
    return write_matrix_file(
        tmp_path, "system.json", [[[2.0, 0.0], [0.0, 0.0]], rotation(1.0 / 3.0)],
        roles={"singular": 1, "rotation": 2},
    )


def _result(output):
    report = json.loads(output)
    assert report["schema_version"] == 1
    return report["result"]


@pytest.mark.usefixtures("clean_env")
class TestRadiusCommand:
    """Test switchrad radius."""

    def test_alpha_only(self, runner):
        """Test the diag(2, 0) family at alpha = 1/3."""
        result = runner.invoke(cli, ["radius", "--alpha", "1/3"])
        assert result.exit_code == 0, result.stderr
        radius = _result(result.stdout)["radius"]
        assert radius["value"] == pytest.approx(1.0)
        assert radius["case"] == "FiniteAttained"
        assert radius["witness_l"] == 1

    def test_csv_row(self, runner):
        """Test the CSV form of an exact zero."""
        result = runner.invoke(cli, ["radius", "--alpha", "1/2", "--format", "csv"])
        assert result.exit_code == 0
        assert result.stdout == "alpha,value,case,witness_l,certified\n0.5,0,ExactZero,1,true\n"

    def test_system_file(self, runner, system_file):
        """Test a role-annotated system uses its own angle."""
        result = runner.invoke(cli, ["radius", "--system", str(system_file)])
        assert result.exit_code == 0, result.stderr
        report = _result(result.stdout)
        assert report["params"]["beta"] == pytest.approx(0.5)
        assert report["radius"]["value"] == pytest.approx(1.0)

    def test_nilpotent_system(self, runner, tmp_path):
        """Test a nilpotent singular member reports 0."""
        path = write_matrix_file(
            tmp_path, "nilpotent.json", [[[0.0, 1.0], [0.0, 0.0]], rotation(0.3)],
            roles={"singular": 1, "rotation": 2},
        )
        result = runner.invoke(cli, ["radius", "--system", str(path)])
        assert result.exit_code == 0
        assert _result(result.stdout)["radius"]["case"] == "ExactZero"

    def test_missing_arguments(self, runner):
        """Test radius needs --system or --alpha."""
        result = runner.invoke(cli, ["radius"])
        assert result.exit_code == 2

    def test_unreadable_alpha(self, runner):
        """Test parse errors exit with code 2 and a message on stderr."""
        result = runner.invoke(cli, ["radius", "--alpha", "one third"])
        assert result.exit_code == 2
        assert "Error:" in result.stderr
        assert result.stdout == ""

    def test_non_singular_system(self, runner, tmp_path):
        """Test validation errors exit with code 2."""
        path = write_matrix_file(
            tmp_path, "regular.json", [np.eye(2), rotation(0.3)], roles={"singular": 1, "rotation": 2}
        )
        result = runner.invoke(cli, ["radius", "--system", str(path)])
        assert result.exit_code == 2

    def test_out_file(self, runner, tmp_path):
        """Test --out writes the report instead of stdout."""
        out = tmp_path / "radius.json"
        result = runner.invoke(cli, ["radius", "--alpha", "2/5", "--out", str(out)])
        assert result.exit_code == 0
        assert result.stdout == ""
        assert _result(out.read_text())["radius"]["value"] == pytest.approx(0.78615, abs=1e-5)


@pytest.mark.usefixtures("clean_env")
class TestScanCommand:
    """Test switchrad scan."""

    def test_grid(self, runner):
        """Test a five-point grid as CSV."""
        result = runner.invoke(cli, ["scan", "--grid", "5"])
        assert result.exit_code == 0, result.stderr
        lines = result.stdout.strip().split("\n")
        assert lines[0] == "alpha,value,case,witness_l,certified"
        assert len(lines) == 6
        assert lines[3].startswith("0.5,0,ExactZero")

    def test_json(self, runner):
        """Test the JSON form lists every row."""
        result = runner.invoke(cli, ["scan", "--alphas", "1/3,2/3", "--format", "json"])
        assert result.exit_code == 0
        rows = _result(result.stdout)["rows"]
        assert [row["alpha"] for row in rows] == ["1/3", "2/3"]

    def test_cf_entries(self, runner):
        """Test --alphas accepts several continued-fraction spellings."""
        result = runner.invoke(cli, ["scan", "--alphas", "1/3,cf:[2,3],cf:[1,4,2]"])
        assert result.exit_code == 0, result.stderr
        lines = result.stdout.strip().split("\n")
        assert len(lines) == 4

    def test_two_sources(self, runner):
        """Test conflicting sources exit with code 2."""
        result = runner.invoke(cli, ["scan", "--grid", "5", "--alphas", "1/3"])
        assert result.exit_code == 2


@pytest.mark.usefixtures("clean_env")
class TestEstimateCommand:
    """Test switchrad estimate."""

    def test_estimate(self, runner, example4_file):
        """Test rate estimates with the subradius lower bound."""
        result = runner.invoke(
            cli, ["estimate", "--set", str(example4_file), "--depth", "4", "--subradius", "1"]
        )
        assert result.exit_code == 0, result.stderr
        report = _result(result.stdout)
        assert report["theorem1_lower_bound"] == 0.5
        assert report["depth"] == 4
        assert report["products_visited"] == [2, 4, 8, 16]

    def test_subsets(self, runner, example4_file):
        """Test --subsets adds the subset comparison."""
        result = runner.invoke(cli, ["estimate", "--set", str(example4_file), "--depth", "3", "--subsets"])
        assert result.exit_code == 0
        assert len(_result(result.stdout)["subsets"]["subsets"]) == 2

    def test_csv(self, runner, example4_file):
        """Test one CSV row per extremum."""
        result = runner.invoke(cli, ["estimate", "--set", str(example4_file), "--depth", "3", "--format", "csv"])
        assert result.exit_code == 0
        lines = result.stdout.strip().split("\n")
        assert lines[0] == "quantity,rate,depth,sequence"
        assert len(lines) == 5

    def test_guard_from_environment(self, runner, example4_file):
        """Test the enumeration guard from the environment exits with code 3."""
        result = runner.invoke(
            cli, ["estimate", "--set", str(example4_file), "--depth", "8"],
            env={"SWITCHRAD_ENUM_GUARD": "100"},
        )
        assert result.exit_code == 3


@pytest.mark.usefixtures("clean_env")
class TestSearchCommand:
    """Test switchrad search."""

    def test_search(self, runner, example8_file):
        """Test a short search on the three-member set."""
        result = runner.invoke(cli, ["search", "--set", str(example8_file), "--length", "4"])
        assert result.exit_code == 0, result.stderr
        report = _result(result.stdout)
        assert report["objective"] == "sr"
        assert report["length"] == 4
        assert report["tie_count"] >= 1

    def test_search_csv(self, runner, example4_file):
        """Test the CSV form."""
        result = runner.invoke(
            cli, ["search", "--set", str(example4_file), "--length", "3", "--objective", "norm", "--format", "csv"]
        )
        assert result.exit_code == 0
        assert result.stdout.startswith("sequence,value,rate,ties\n")


@pytest.mark.usefixtures("clean_env")
class TestCertifyCommand:
    """Test switchrad certify."""

    def test_covered(self, runner, example4_file):
        """Test the five products cover the circle."""
        result = runner.invoke(
            cli, ["certify", "--set", str(example4_file), "--products", ",".join(EXAMPLE4_PRODUCTS)]
        )
        assert result.exit_code == 0, result.stderr
        report = _result(result.stdout)
        assert report["covered"] is True
        assert report["grid_size"] == 10_000

    def test_no_products(self, runner, example4_file):
        """Test an empty product list is reported, not an error."""
        result = runner.invoke(cli, ["certify", "--set", str(example4_file), "--grid", "100"])
        assert result.exit_code == 0
        report = _result(result.stdout)
        assert report["covered"] is False
        assert report["worst_norm"] is None

    def test_csv(self, runner, example4_file):
        """Test one CSV row per theta sample."""
        result = runner.invoke(
            cli, ["certify", "--set", str(example4_file), "--products", "M1M2", "--grid", "20", "--format", "csv"]
        )
        assert result.exit_code == 0
        assert len(result.stdout.strip().split("\n")) == 21

    def test_three_dimensional_set(self, runner, example8_file):
        """Test certificates need a 2x2 set."""
        result = runner.invoke(cli, ["certify", "--set", str(example8_file), "--products", "M1"])
        assert result.exit_code == 2

    def test_unknown_member(self, runner, example4_file):
        """Test labels must name members of the set."""
        result = runner.invoke(cli, ["certify", "--set", str(example4_file), "--products", "M1M3"])
        assert result.exit_code == 2


@pytest.mark.usefixtures("clean_env")
class TestGlobalOptions:
    """Test group-level options."""

    def test_version(self, runner):
        """Test --version."""
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.stdout

    def test_bad_log_level(self, runner):
        """Test an unknown log level is a usage error."""
        result = runner.invoke(cli, ["--log-level", "LOUD", "radius", "--alpha", "1/3"])
        assert result.exit_code == 2

    def test_precision_echoed(self, runner):
        """Test global options reach the config echo."""
        result = runner.invoke(cli, ["--precision", "40", "radius", "--alpha", "1/3"])
        assert result.exit_code == 0
        assert json.loads(result.stdout)["config"]["precision_digits"] == 40

    def test_bad_precision(self, runner):
        """Test an invalid precision exits with code 2."""
        result = runner.invoke(cli, ["--precision", "5", "radius", "--alpha", "1/3"])
        assert result.exit_code == 2
