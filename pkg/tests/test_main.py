import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd
from click.testing import CliRunner

from src import __version__
from src.ls_parser import parse_source, parse_term
from src.ls_reduce import normalize
from src.ls_vec import compile_matrix, library_prelude, matrix_to_json, measure
from src.main import main

SAMPLES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "samples")

MEASURE_PROGRAM = """
def state = H ket0;
def main = smatch state { a => [a, star(0)] | b => [star(0), b] };
"""


class CLITestCase(unittest.TestCase):
    """Shared fixtures: a CliRunner and temporary program files"""

    def setUp(self):
        """Set up test fixtures before each test method"""
        self.runner = CliRunner()
        self.temp_files = []

    def tearDown(self):
        """Clean up temporary files after each test"""
        for temp_file in self.temp_files:
            if os.path.exists(temp_file):
                os.unlink(temp_file)

    def create_temp_file(self, content: str, suffix: str = '.lsq') -> str:
        """Helper method to create temporary program or matrix files for testing"""
        temp_file = tempfile.NamedTemporaryFile(mode='w', suffix=suffix, delete=False, encoding='utf-8')
        temp_file.write(content)
        temp_file.close()
        self.temp_files.append(temp_file.name)
        return temp_file.name

    def create_temp_matrix(self, matrix) -> str:
        return self.create_temp_file(matrix_to_json(matrix), suffix='.json')

    def invoke(self, *args, **kwargs):
        return self.runner.invoke(main, list(args), **kwargs)

    def invoke_structured(self, *args, **kwargs):
        result = self.invoke(*args, '--format', 'structured', **kwargs)
        self.assertEqual(result.exit_code, 0, result.output)
        return json.loads(result.stdout)


class TestGroupOptions(CLITestCase):

    def test_version(self):
        result = self.invoke('--version')
        self.assertEqual(result.exit_code, 0)
        self.assertIn(f"lsq, version {__version__}", result.output)

    def test_quiet_and_verbose_conflict(self):
        result = self.invoke('-q', '-v', 'check', '-e', 'star(1)')
        self.assertEqual(result.exit_code, 1)
        self.assertIn("cannot be used together", result.output)

    def test_verbose_logs_progress(self):
        result = self.invoke('-v', 'run', '-e', 'H ket0')
        self.assertEqual(result.exit_code, 0)
        self.assertIn("[VERBOSE] Normal form reached", result.output)

    def test_quiet_hides_errors(self):
        result = self.invoke('-q', 'run', '-e', 'star(1) + [star(1), star(0)]')
        self.assertEqual(result.exit_code, 2)
        self.assertNotIn("Error:", result.output)


class TestCheckCommand(CLITestCase):
    """Test suite for `lsq check`"""

    def test_prints_types(self):
        path = self.create_temp_file("def a = star(1);\ndef main = [a, star(0)];\n")
        result = self.invoke('check', path)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(result.output.splitlines(), ["a : T", "main : T odot T"])

    def test_empty_program(self):
        path = self.create_temp_file("-- nothing here\n")
        result = self.invoke('check', path)
        self.assertEqual(result.exit_code, 0)
        self.assertEqual(result.output.strip(), "no main")

    def test_type_error(self):
        path = self.create_temp_file("def main = star(1) + [star(1), star(0)];\n")
        result = self.invoke('check', path)
        self.assertEqual(result.exit_code, 2)
        self.assertIn("Error:", result.output)

    def test_type_error_names_the_definition(self):
        path = self.create_temp_file("def ok = star(1);\n\ndef bad = star(1) + [star(1), star(0)];\n")
        result = self.invoke('check', path)
        self.assertEqual(result.exit_code, 2)
        self.assertIn("Error: bad (line 3): ", result.output)

    def test_syntax_error_reports_position(self):
        path = self.create_temp_file("def ok = star(1);\ndef main = [star(1), ;\n")
        result = self.invoke('check', path)
        self.assertEqual(result.exit_code, 1)
        self.assertIn("line 2", result.output)

    def test_invalid_utf8(self):
        path = self.create_temp_file("")
        with open(path, 'wb') as f:
            f.write(b"def main = star(1);\n\xff\n")
        result = self.invoke('check', path)
        self.assertEqual(result.exit_code, 1)

    def test_lint_finds_duplication(self):
        result = self.invoke('check', '--lint-linear', '-e', 'lam x: T. [x, x]')
        self.assertEqual(result.exit_code, 0)
        self.assertIn("lint: main: lambda-bound variable 'x' used 2 time(s)", result.output)

    def test_lint_clean(self):
        result = self.invoke('check', '--lint-linear', '-e', 'lam x: T. x')
        self.assertEqual(result.exit_code, 0)
        self.assertIn("lint: clean", result.output)

    def test_structured(self):
        path = self.create_temp_file("def main = [star(1), star(0)];\n")
        document = self.invoke_structured('check', path)
        self.assertEqual(document, {
            "definitions": [{"name": "main", "type": "T odot T"}],
            "main": True,
            "lint": [],
        })

    def test_extensions_are_opt_in(self):
        program = "def main = pmatch inlr star(1) star(2) { inl a => a | inr b => b };\n"
        path = self.create_temp_file(program)
        self.assertEqual(self.invoke('check', path).exit_code, 1)
        result = self.invoke('check', '--ext', path)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(result.output.strip(), "main : T")

    def test_lambda_s_program(self):
        path = self.create_temp_file("%lambda-s\ndef main = lam x: S(Bool). x;\n")
        result = self.invoke('check', path)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(result.output.strip(), "main : S(Bool) -> S(Bool)")

    def test_file_and_expression_are_exclusive(self):
        path = self.create_temp_file("def main = star(1);\n")
        self.assertEqual(self.invoke('check', path, '-e', 'star(1)').exit_code, 1)
        self.assertEqual(self.invoke('check').exit_code, 1)

    def test_missing_file_is_a_usage_error(self):
        result = self.invoke('check', 'does-not-exist.lsq')
        self.assertEqual(result.exit_code, 2)


class TestRunCommand(CLITestCase):
    """Test suite for `lsq run`"""

    def test_hadamard(self):
        result = self.invoke('run', '-e', 'H ket0')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(result.output.strip(), "[star(1/sqrt2), star(1/sqrt2)]")

    def test_sum_of_stars(self):
        result = self.invoke('run', '-e', 'star(1) + star(0)')
        self.assertEqual(result.output.strip(), "star(1)")

    def test_strategies_agree(self):
        outermost = self.invoke('run', '-e', 'H ket0')
        innermost = self.invoke('run', '--strategy', 'innermost', '-e', 'H ket0')
        self.assertEqual(outermost.exit_code, 0)
        self.assertEqual(outermost.output, innermost.output)

    def test_trace(self):
        result = self.invoke('run', '--trace', '-e', 'H ket0')
        self.assertEqual(result.exit_code, 0)
        self.assertTrue(result.output.startswith("step 1: "))
        self.assertIn("beta", result.output)

    def test_structured_deterministic(self):
        document = self.invoke_structured('run', '-e', 'H ket0')
        self.assertEqual(document["result"], "[star(1/sqrt2), star(1/sqrt2)]")
        self.assertEqual(document["mode"], "det")
        self.assertIsNone(document["seed"])
        self.assertEqual(document["branches"], [])
        self.assertGreater(document["steps"], 0)
        self.assertNotIn("trace", document)

    def test_deterministic_measurement_sums_branches(self):
        path = self.create_temp_file(MEASURE_PROGRAM)
        expected, _ = normalize(parse_source(MEASURE_PROGRAM, prelude=library_prelude()).main)
        result = self.invoke('run', path)
        self.assertEqual(result.output.strip(), str(expected))

    def test_probabilistic_measurement(self):
        path = self.create_temp_file(MEASURE_PROGRAM)
        document = self.invoke_structured('run', '--mode', 'prob', '--seed', '7', '--trace', path)
        self.assertEqual(document["mode"], "prob")
        self.assertEqual(document["seed"], 7)
        # H ket0 itself takes a certain branch before the measurement
        measurement = document["branches"][-1]
        self.assertIn(measurement["choice"], ("L", "R"))
        self.assertAlmostEqual(measurement["probability"], 0.5)
        for branch in document["branches"][:-1]:
            self.assertAlmostEqual(branch["probability"], 1.0)
        self.assertTrue(any("match-prob" in line for line in document["trace"]))

    def test_match_on_a_scaled_state(self):
        program = "smatch 2 * [star(1), star(0)] { x => x + star(1) | y => y }"
        for strategy in ('outermost', 'innermost'):
            with self.subTest(strategy=strategy):
                result = self.invoke('run', '--strategy', strategy, '-e', program)
                self.assertEqual(result.exit_code, 0, result.output)
                self.assertEqual(result.output.strip(), "star(3)")

    def test_scalar_overflow(self):
        result = self.invoke('run', '-e', '1e200 * 1e200 * star(1)')
        self.assertEqual(result.exit_code, 3)
        self.assertIn("overflow", result.output)
        self.assertNotIn("Unexpected error", result.output)

    def test_overlong_sum_is_a_syntax_error(self):
        result = self.invoke('run', '-e', " + ".join(["star(1)"] * 3000))
        self.assertEqual(result.exit_code, 1)
        self.assertIn("nested too deeply", result.output)
        self.assertIn("line 1, column 1", result.output)

    def test_probabilistic_run_is_reproducible(self):
        path = self.create_temp_file(MEASURE_PROGRAM)
        first = self.invoke('run', '--mode', 'prob', '--seed', '11', path)
        second = self.invoke('run', '--mode', 'prob', '--seed', '11', path)
        self.assertEqual(first.exit_code, 0)
        self.assertEqual(first.output, second.output)

    def test_probabilistic_mode_needs_a_seed(self):
        result = self.invoke('run', '--mode', 'prob', '-e', 'H ket0')
        self.assertEqual(result.exit_code, 1)
        self.assertIn("--seed is required", result.output)

    def test_zero_state_cannot_be_measured(self):
        program = "smatch [star(0), star(0)] { a => [a, star(0)] | b => [star(0), b] }"
        result = self.invoke('run', '--mode', 'prob', '--seed', '1', '-e', program)
        self.assertEqual(result.exit_code, 3)

    def test_fuel_from_environment(self):
        result = self.invoke('run', '-e', 'H ket0', env={'LSQ_FUEL': '1'})
        self.assertEqual(result.exit_code, 3)
        result = self.invoke('run', '--fuel', '1000', '-e', 'H ket0', env={'LSQ_FUEL': '1'})
        self.assertEqual(result.exit_code, 0, result.output)

    def test_fuel_exhaustion_prints_partial_trace(self):
        result = self.invoke('run', '--fuel', '1', '--trace', '-e', 'H ket0')
        self.assertEqual(result.exit_code, 3)
        self.assertIn("step 1: ", result.output)

    def test_type_error_stops_before_reduction(self):
        result = self.invoke('run', '-e', 'H star(1)')
        self.assertEqual(result.exit_code, 2)

    def test_program_without_main(self):
        path = self.create_temp_file("def a = star(1);\n")
        result = self.invoke('run', path)
        self.assertEqual(result.exit_code, 1)
        self.assertIn("no main", result.output)

    def test_lambda_s_program_is_rejected(self):
        path = self.create_temp_file("%lambda-s\ndef main = true;\n")
        result = self.invoke('run', path)
        self.assertEqual(result.exit_code, 1)
        self.assertIn("lsq lambdas", result.output)

    def test_additive_program(self):
        program = "pmatch inlr star(1) star(2) { inl a => a | inr b => b }"
        result = self.invoke('run', '--ext', '-e', program)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(result.output.strip(), "star(3)")
        self.assertEqual(self.invoke('run', '-e', program).exit_code, 1)


class TestCompileCommand(CLITestCase):
    """Test suite for `lsq compile`"""

    def test_identity_check(self):
        matrix = self.create_temp_matrix(np.eye(2))
        vector = self.create_temp_matrix(np.array([[1], [0]]))
        result = self.invoke('compile', '--matrix', matrix, '--check', vector)
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(result.output.splitlines()[-1], "max-abs-error: 0")

    def test_printed_term_reads_back(self):
        matrix = np.array([[0.5, -1j], [2, 0.25 + 1j]])
        document = self.invoke_structured('compile', '--matrix', self.create_temp_matrix(matrix))
        self.assertEqual((document["rows"], document["cols"]), (2, 2))
        self.assertNotIn("max_abs_error", document)
        self.assertEqual(parse_term(document["term"]), compile_matrix(matrix))

    def test_structured_check(self):
        matrix = self.create_temp_matrix(np.random.default_rng(0).normal(size=(4, 2)))
        vector = self.create_temp_matrix(np.array([[0.6], [0.8j]]))
        document = self.invoke_structured('compile', '--matrix', matrix, '--check', vector)
        self.assertEqual((document["rows"], document["cols"]), (4, 2))
        self.assertLess(document["max_abs_error"], 1e-9)

    def test_three_rows(self):
        matrix = self.create_temp_file('{"rows": 3, "cols": 1, "entries": [[1, 0], [0, 0], [0, 0]]}', '.json')
        result = self.invoke('compile', '--matrix', matrix)
        self.assertEqual(result.exit_code, 4)

    def test_vector_length_mismatch(self):
        matrix = self.create_temp_matrix(np.eye(2))
        vector = self.create_temp_matrix(np.ones((4, 1)))
        result = self.invoke('compile', '--matrix', matrix, '--check', vector)
        self.assertEqual(result.exit_code, 4)

    def test_malformed_document(self):
        matrix = self.create_temp_file('{"rows": 2}', '.json')
        self.assertEqual(self.invoke('compile', '--matrix', matrix).exit_code, 4)

    def test_non_finite_entries(self):
        for document in ('{"rows": 1, "cols": 1, "entries": [[NaN, 0]]}',
                         '{"rows": 1, "cols": 1, "entries": [[0, Infinity]]}'):
            with self.subTest(document=document):
                matrix = self.create_temp_file(document, '.json')
                result = self.invoke('compile', '--matrix', matrix)
                self.assertEqual(result.exit_code, 4)
                self.assertIn("finite", result.output)

    def test_matrix_is_required(self):
        self.assertEqual(self.invoke('compile').exit_code, 2)


class TestSampleCommand(CLITestCase):
    """Test suite for `lsq sample`"""

    def test_plus_state_frequencies(self):
        document = self.invoke_structured('sample', '--shots', '10000', '--seed', '42', '-e', 'ketplus')
        self.assertEqual(document["shots"], 10000)
        self.assertEqual(document["qubits"], 1)
        self.assertTrue(0.48 <= document["frequencies"]["0"] <= 0.52)

    def test_basis_state(self):
        document = self.invoke_structured('sample', '--seed', '1', '-e', 'ket0')
        self.assertEqual(document["frequencies"], {"0": 1.0})

    def test_bell_program(self):
        path = self.create_temp_file("def plus0 = [1/sqrt2 * ket0, 1/sqrt2 * ket0];\ndef main = CNOT plus0;\n")
        document = self.invoke_structured('sample', '--shots', '2000', '--seed', '3', path)
        self.assertTrue(set(document["counts"]) <= {"00", "11"})
        self.assertEqual(sum(document["counts"].values()), 2000)

    def test_human_table(self):
        result = self.invoke('sample', '--shots', '100', '--seed', '5', '-e', 'H ket0')
        self.assertEqual(result.exit_code, 0, result.output)
        header = result.output.splitlines()[0].split()
        self.assertEqual(header, ["outcome", "index", "count", "frequency", "born"])

    def test_seed_is_required(self):
        result = self.invoke('sample', '-e', 'ketplus')
        self.assertEqual(result.exit_code, 1)
        self.assertIn("--seed is required", result.output)

    def test_workers_do_not_change_counts(self):
        single = self.invoke_structured('sample', '--shots', '500', '--seed', '9', '-e', 'H ket1')
        threaded = self.invoke_structured('sample', '--shots', '500', '--seed', '9', '--workers', '4', '-e', 'H ket1')
        self.assertEqual(single["counts"], threaded["counts"])

    def test_options_reach_the_sampler(self):
        with patch('src.main.measure', wraps=measure) as mock_measure:
            result = self.invoke('sample', '--shots', '10', '--seed', '2', '--workers', '3', '-e', 'ket1')
        self.assertEqual(result.exit_code, 0, result.output)
        args, kwargs = mock_measure.call_args
        self.assertEqual(args[1:], (10, 2))
        self.assertEqual(kwargs["workers"], 3)

    def test_csv_output(self):
        path = self.create_temp_file("", suffix='.csv')
        result = self.invoke('sample', '--shots', '200', '--seed', '4', '--csv', path, '-e', 'bell')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn(f"Wrote {path}", result.output)
        table = pd.read_csv(path, dtype={"outcome": str})
        self.assertEqual(list(table.columns), ["outcome", "index", "count", "frequency", "born"])
        self.assertEqual(set(table["outcome"]), {"00", "11"})
        self.assertEqual(int(table["count"].sum()), 200)

    def test_non_state_program(self):
        result = self.invoke('sample', '--seed', '1', '-e', 'lam x: T. x')
        self.assertEqual(result.exit_code, 3)

    def test_zero_state(self):
        result = self.invoke('sample', '--seed', '1', '-e', '[star(0), star(0)]')
        self.assertEqual(result.exit_code, 3)


class TestLambdasCommand(CLITestCase):
    """Test suite for `lsq lambdas`"""

    def test_identity(self):
        result = self.invoke('lambdas', '-e', '(lam x: Bool. x) true')
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertEqual(result.output.strip(), "true")

    def test_span_variable_used_twice(self):
        result = self.invoke('lambdas', '-e', 'lam x: S(Bool). x + x')
        self.assertEqual(result.exit_code, 2)

    def test_structured(self):
        document = self.invoke_structured('lambdas', '-e', '(lam x: Bool. x) (0.5 * true + 0.5 * true)')
        self.assertEqual(document["type"], "S(Bool)")
        self.assertEqual(document["steps"], 3)

    def test_file_needs_header(self):
        path = self.create_temp_file("def main = true;\n")
        result = self.invoke('lambdas', path)
        self.assertEqual(result.exit_code, 1)
        self.assertIn("%lambda-s", result.output)

    def test_fuel(self):
        result = self.invoke('lambdas', '--fuel', '1', '-e', '(lam x: Bool. x) (0.5 * true + 0.5 * true)')
        self.assertEqual(result.exit_code, 3)


class TestSamplePrograms(CLITestCase):
    """The programs shipped in samples/ run cleanly"""

    def sample(self, name: str) -> str:
        return os.path.join(SAMPLES, name)

    def test_proof_programs_typecheck(self):
        for name in ("hadamard.lsq", "bell.lsq", "measure.lsq"):
            with self.subTest(sample=name):
                result = self.invoke('check', self.sample(name))
                self.assertEqual(result.exit_code, 0, result.output)
                self.assertIn("main : ", result.output)

    def test_hadamard_program(self):
        result = self.invoke('run', self.sample("hadamard.lsq"))
        self.assertEqual(result.output.strip(), "[star(1/sqrt2), star(1/sqrt2)]")

    def test_bell_program(self):
        document = self.invoke_structured('sample', '--shots', '1000', '--seed', '42', self.sample("bell.lsq"))
        self.assertEqual(set(document["counts"]), {"00", "11"})

    def test_hadamard_matrix(self):
        document = self.invoke_structured(
            'compile', '--matrix', self.sample("hadamard.json"), '--check', self.sample("ket0.json"))
        self.assertLess(document["max_abs_error"], 1e-12)

    def test_lambda_s_program(self):
        document = self.invoke_structured('lambdas', self.sample("call_by_base.lsq"))
        self.assertEqual(document["type"], "S(Bool)")


if __name__ == '__main__':
    unittest.main()
