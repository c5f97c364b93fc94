from io import StringIO
import os
from polyakconvexity.cli import EXIT_ERROR, EXIT_OK, EXIT_REFUTED, main
import tempfile
import unittest


def run(*argv):
    out = StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


class TestModulusCommand(unittest.TestCase):
    def test_euclidean_space(self):
        code, text = run("modulus", "--p", "2", "--eps-grid", "0.5,1.0")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("[power type 2]", text)
        self.assertIn("holds", text)
        self.assertIn("0.133974596", text)  # 1 - sqrt(3)/2

    def test_power_type_fails(self):
        code, text = run("modulus", "--p", "4", "--eps-grid", "0.5")
        self.assertEqual(code, EXIT_REFUTED)
        self.assertIn("fails", text)
        code, _ = run("modulus", "--p", "inf", "--eps-grid", "0.5", "--full-search")
        self.assertEqual(code, EXIT_REFUTED)

    def test_eps_out_of_range(self):
        with self.assertRaises(SystemExit) as context:
            run("modulus", "--eps-grid", "2.5")
        self.assertEqual(context.exception.code, EXIT_ERROR)


class TestCertifyCommand(unittest.TestCase):
    def test_rank_deficient_map(self):
        code, text = run("certify", "--registry", "remark-rank-deficient", "--samples", "200")
        self.assertEqual(code, EXIT_REFUTED)
        self.assertIn("REFUTED", text)
        self.assertIn("[witness 1]", text)

    def test_auto_radius(self):
        code, text = run("certify", "--registry", "positive-quadratic", "--eps", "auto", "--samples", "200")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("[radius]", text)
        self.assertIn("0.1875", text)
        self.assertIn("CERTIFIED", text)

    def test_sample_records(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "pairs.csv")
            code, _ = run("certify", "--registry", "positive-quadratic", "--eps", "0.1", "--samples", "50",
                          "--emit-samples", path)
            self.assertEqual(code, EXIT_OK)
            with open(path) as f:
                self.assertEqual(len(f.read().splitlines()), 51)

    def test_missing_x0(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "map.pkp")
            with open(path, "w") as f:
                f.write("[space]\ndim = 1\n\n[map 1]\n1.0 : 2\n")
            with self.assertRaises(SystemExit) as context:
                run("certify", path, "--eps", "0.1")
            self.assertEqual(context.exception.code, EXIT_ERROR)
            code, _ = run("certify", path, "--eps", "0.1", "--x0", "1.0", "--samples", "50")
            self.assertEqual(code, EXIT_OK)

    def test_deterministic_reports(self):
        argv = ("certify", "--registry", "remark-linf", "--p", "2", "--eps", "0.075", "--samples", "100",
                "--seed", "7")
        self.assertEqual(run(*argv), run(*argv))


class TestOtherCommands(unittest.TestCase):
    def test_witness(self):
        code, text = run("witness", "--registry", "remark-linf", "--samples", "500")
        self.assertEqual(code, EXIT_REFUTED)
        self.assertIn("gap lower bound", text)

    def test_regularity(self):
        code, text = run("regularity", "--registry", "positive-quadratic", "--samples", "200")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("[linear openness]", text)
        code, _ = run("regularity", "--registry", "remark-rank-deficient")
        self.assertEqual(code, EXIT_REFUTED)

    def test_localize(self):
        code, text = run("localize", "--registry", "disk-inactive", "--samples", "500")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("x_eps", text)
        self.assertIn("least_squares", text)

    def test_duality(self):
        code, text = run("duality", "--registry", "disk-active", "--samples", "500")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("[duality]", text)

    def test_calm(self):
        code, text = run("calm", "--registry", "disk-inactive", "--samples", "500", "--perturbations", "20")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("[calmness]", text)

    def test_localized_reports_are_deterministic(self):
        for argv in (("localize", "--registry", "disk-active", "--samples", "500", "--seed", "42"),
                     ("duality", "--registry", "disk-active", "--samples", "500", "--seed", "42"),
                     ("calm", "--registry", "disk-inactive", "--samples", "500", "--perturbations", "20", "--seed", "42")):
            self.assertEqual(run(*argv), run(*argv), argv[0])

    def test_localize_needs_a_problem(self):
        with self.assertRaises(SystemExit) as context:
            run("localize", "--registry", "remark-linf")
        self.assertEqual(context.exception.code, EXIT_ERROR)


class TestErrors(unittest.TestCase):
    def test_unknown_registry_name(self):
        self.assertEqual(run("certify", "--registry", "no-such-instance")[0], EXIT_ERROR)

    def test_infeasible_x0(self):
        self.assertEqual(run("localize", "--registry", "disk-active", "--x0", "0,0")[0], EXIT_ERROR)

    def test_missing_command(self):
        with self.assertRaises(SystemExit) as context:
            run()
        self.assertEqual(context.exception.code, EXIT_ERROR)


if __name__ == "__main__":
    unittest.main()
