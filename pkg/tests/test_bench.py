"""Tests for the run harness."""

import csv
import json
import math
from dataclasses import replace
from unittest.mock import patch

import numpy as np
import pytest

from spin_decohere.bench import (
    AverageSummary,
    BenchReport,
    BenchRow,
    TrajectorySummary,
    _timing_check,
    error_norm,
    format_number,
    phase_free_error,
    run,
    run_average,
    run_benchmark,
    run_trajectory,
)
from spin_decohere.config import parse_config
from spin_decohere.errors import InvalidParameterError
from spin_decohere.hilbert import StateVector, basis_state, random_state


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def trajectory_config(tmp_path):
    def make(extra="", algorithm="CP"):
        return parse_config(
            f"L=2\nJ0=8\nJ=0.128\nalgorithm={algorithm}\nt_final=1\ntau=0.25\n"
            f"output={tmp_path / 'traj.csv'}\n" + extra
        )

    return make


@pytest.fixture
def benchmark_config(tmp_path):
    return parse_config(
        "mode=benchmark\nL=2\nJ0=8\nJ=0.128\nt_final=1\ntau=0.01\n"
        "algorithm=ED\nalgorithm=SP_PAIR_U2\nalgorithm=SP_PAIR_U4\n"
        "algorithm=SP_XYZ_U2\nalgorithm=SP_XYZ_U4\nalgorithm=CP\n"
        "algorithm=SIL:5\nalgorithm=SIL:16\n"
        f"output={tmp_path / 'bench' / 'table.csv'}\n"
    )


class TestErrorMetrics:
    """Test suite for state distances."""

    def test_identical(self):
        """Test that a state has no distance to itself."""
        state = random_state(3, np.random.default_rng(0))
        assert error_norm(state, state) == 0.0

    def test_orthonormal(self):
        """Test sqrt(2) between orthonormal states."""
        assert error_norm(basis_state(2, 0), basis_state(2, 1)) == pytest.approx(
            math.sqrt(2)
        )

    def test_global_phase_counts(self):
        """Test that a sign flip costs 2, and nothing once the phase is free."""
        state = random_state(3, np.random.default_rng(1))
        flipped = StateVector(-state.amplitudes, 3)
        assert error_norm(state, flipped) == pytest.approx(2.0)
        assert phase_free_error(state, flipped) == pytest.approx(0.0, abs=1e-15)

    def test_small_perturbation(self):
        """Test that a tiny difference survives a global phase rotation."""
        rng = np.random.default_rng(3)
        state = random_state(4, rng)
        direction = random_state(4, rng).amplitudes
        direction = direction - np.vdot(state.amplitudes, direction) * state.amplitudes
        direction = direction / np.linalg.norm(direction)
        perturbed = StateVector(state.amplitudes + 1e-9 * direction, 4)
        rotated = StateVector(np.exp(0.7j) * perturbed.amplitudes, 4)
        assert error_norm(state, perturbed) == pytest.approx(1e-9, rel=1e-6)
        free = phase_free_error(state, rotated)
        assert 0 < free <= error_norm(state, perturbed) * (1 + 1e-6)
        assert free == pytest.approx(1e-9, rel=1e-4)

    def test_symmetric(self):
        """Test symmetry of both metrics."""
        rng = np.random.default_rng(2)
        a, b = random_state(3, rng), random_state(3, rng)
        assert error_norm(a, b) == pytest.approx(error_norm(b, a))
        assert phase_free_error(a, b) == pytest.approx(phase_free_error(b, a))
        assert phase_free_error(a, b) <= error_norm(a, b)

    def test_dimension_mismatch(self):
        """Test that states of different size cannot be compared."""
        with pytest.raises(InvalidParameterError):
            error_norm(basis_state(2, 0), basis_state(3, 0))

    def test_number_format(self):
        """Test 17 significant digits with a decimal point."""
        assert format_number(0.1) == "0.10000000000000001"
        assert format_number(2) == "2"


class TestRunTrajectory:
    """Test suite for trajectory runs."""

    def test_csv_schema(self, trajectory_config):
        """Test the header and the first row."""
        cfg = trajectory_config()
        summary = run_trajectory(cfg)
        rows = read_csv(cfg.output_path)
        assert rows[0] == ["t", "sz1", "sz2", "sz_total", "norm", "energy"]
        assert len(rows) == 6
        assert float(rows[1][1]) == pytest.approx(0.5, abs=1e-12)
        assert summary.samples == 5
        assert summary.final_norm == pytest.approx(1.0, abs=1e-12)

    def test_zero_final_time(self, trajectory_config):
        """Test that t_final = 0 writes a single row with sz1 = 1/2."""
        cfg = replace(trajectory_config(), t_final=0.0)
        run_trajectory(cfg)
        rows = read_csv(cfg.output_path)
        assert len(rows) == 2
        assert float(rows[1][1]) == pytest.approx(0.5, abs=1e-12)

    def test_deterministic(self, trajectory_config, tmp_path):
        """Test that repeated runs give byte-identical files."""
        cfg = trajectory_config()
        run_trajectory(cfg)
        first = cfg.output_path.read_bytes()
        run_trajectory(cfg)
        assert cfg.output_path.read_bytes() == first

    def test_leap_then_refine(self, trajectory_config):
        """Test that leap_to starts the file at the leap time."""
        cfg = trajectory_config("leap_to=0.5\n", algorithm="SP_PAIR_U4")
        summary = run_trajectory(cfg)
        rows = read_csv(cfg.output_path)
        assert float(rows[1][0]) == 0.5
        assert summary.label == "CP->SP-Pair(U4)"


class TestRunBenchmark:
    """Test suite for the algorithm comparison."""

    def test_small_instance(self, benchmark_config):
        """Test errors, row order and output files on L=2."""
        report = run_benchmark(benchmark_config)

        assert [row.algorithm for row in report.rows] == [
            "ED",
            "SP-Pair(U2)",
            "SP-Pair(U4)",
            "SP-XYZ(U2)",
            "SP-XYZ(U4)",
            "CP",
            "SIL(5)",
            "SIL(16)",
        ]
        assert report.row("ED").error == 0.0
        assert all(row.error < 1e-3 for row in report.rows)
        assert all(row.error >= 0 and row.wall_seconds >= 0 for row in report.rows)
        assert report.row("CP").error < 1e-9
        assert report.row("SIL(16)").error < 1e-9

        rows = read_csv(benchmark_config.output_path)
        assert rows[0] == ["algorithm", "error", "error_phase_free", "wall_seconds"]
        assert len(rows) == 9

        sidecar = benchmark_config.output_path.with_name("table.csv.json")
        document = json.loads(sidecar.read_text())
        assert document["metadata"]["L"] == 2
        assert document["metadata"]["tau"] == 0.01
        assert len(document["rows"]) == 8

    def test_concurrent_rows(self, benchmark_config):
        """Test that concurrent rows give the same errors."""
        serial = run_benchmark(benchmark_config)
        concurrent = run_benchmark(replace(benchmark_config, workers=4))
        for a, b in zip(serial.rows, concurrent.rows):
            assert a.algorithm == b.algorithm
            assert a.error == pytest.approx(b.error, rel=1e-9, abs=1e-12)
        assert concurrent.metadata["concurrent_rows"] is True

    def test_timing_check(self):
        """Test the soft warning when CP is slower than SP-Pair(U4)."""
        report = BenchReport(
            rows=[
                BenchRow("SP-Pair(U4)", 1e-9, 1e-9, 1.0),
                BenchRow("CP", 1e-13, 1e-13, 2.0),
            ]
        )
        _timing_check(report)
        assert len(report.warnings) == 1
        assert "CP" in report.warnings[0]

    def test_timing_check_quiet_when_cp_faster(self):
        """Test that no warning is recorded when CP wins."""
        report = BenchReport(
            rows=[
                BenchRow("SP-Pair(U4)", 1e-9, 1e-9, 2.0),
                BenchRow("CP", 1e-13, 1e-13, 1.0),
            ]
        )
        _timing_check(report)
        assert report.warnings == []


class TestRunAverage:
    """Test suite for seed-averaged runs."""

    def test_uniform_couplings(self, tmp_path):
        """Test the CSV with the closed form alongside."""
        cfg = parse_config(
            "mode=average\nL=2\nJ0=8\nJ=0.1\nt_final=1\ntau=0.1\n"
            f"seeds=0..3\noutput={tmp_path / 'avg.csv'}\n"
        )
        summary = run_average(cfg)
        rows = read_csv(cfg.output_path)
        assert rows[0] == ["t", "sz1_mean", "sz1_stderr", "sz1_exact"]
        assert len(rows) == 12
        assert float(rows[1][1]) == pytest.approx(0.5, abs=1e-12)
        assert float(rows[1][3]) == pytest.approx(0.5)
        assert summary.seeds == 4
        assert summary.rms_to_exact is not None
        assert 0 <= summary.envelope_to_exact <= 0.5

    def test_non_uniform_couplings(self, tmp_path):
        """Test that the closed-form column is nan without uniform couplings."""
        cfg = parse_config(
            "mode=average\nL=2\nJ0=8\nJ_list=[0.1, 0.2]\nt_final=0.2\ntau=0.1\n"
            f"output={tmp_path / 'avg.csv'}\n"
        )
        summary = run_average(cfg)
        rows = read_csv(cfg.output_path)
        assert all(row[3] == "nan" for row in rows[1:])
        assert summary.rms_to_exact is None
        assert summary.envelope_to_exact is None


class TestRun:
    """Test suite for mode dispatch."""

    @pytest.mark.parametrize(
        "mode, target",
        [
            ("trajectory", "run_trajectory"),
            ("benchmark", "run_benchmark"),
            ("average", "run_average"),
        ],
    )
    def test_dispatch(self, mode, target):
        """Test that each mode reaches its runner."""
        cfg = parse_config(f"mode={mode}\nL=1\nJ0=8\nJ=0.1\nalgorithm=CP\nt_final=1\n")
        with patch(f"spin_decohere.bench.{target}") as runner:
            result = run(cfg)
        runner.assert_called_once_with(cfg)
        assert result is runner.return_value

    def test_result_types(self, trajectory_config):
        """Test the summary type of a real trajectory run."""
        assert isinstance(run(trajectory_config()), TrajectorySummary)
        assert not isinstance(run(trajectory_config()), AverageSummary)
