"""End-to-end runs of the command line interface through ``main``."""

import json

import numpy as np
import pytest

from instrumentum import (
    CompatCoefficients,
    Document,
    KrausSet,
    Povm,
    choi,
    load,
    lueders,
    save,
    validate,
    verify_dilation,
    witness_decompose,
)
from instrumentum.cli import main

from helpers import basis_pvm, depolarizing_kraus


@pytest.fixture
def run(capsys):
    def invoke(*argv):
        code = main(list(argv))
        captured = capsys.readouterr()
        report = json.loads(captured.out) if captured.out.strip() else None
        return code, report, captured.err

    return invoke


@pytest.fixture
def luders_file(tmp_path):
    path = tmp_path / "luders.json"
    save(Document(kind="instrument", value=lueders(basis_pvm(2, ((0,), (1,))))), path)
    return str(path)


@pytest.fixture
def trivial_file(tmp_path):
    eye = np.eye(2, dtype=complex)
    from instrumentum import trivial_from_povm

    m = trivial_from_povm(Povm(2, (("a", eye / 2), ("b", eye / 2))))
    path = tmp_path / "trivial.json"
    save(Document(kind="instrument", value=m), path)
    return str(path)


@pytest.fixture
def state_file(tmp_path):
    path = tmp_path / "plus.json"
    save(Document(kind="matrix", value=np.full((2, 2), 0.5, dtype=complex)), path)
    return str(path)


class TestValidate:
    def test_passes(self, run, luders_file):
        code, report, _ = run("validate", luders_file)
        assert code == 0
        assert report["passed"] is True
        assert report["normalization_defect"] == 0.0

    def test_broken_instrument_exits_two(self, run, tmp_path):
        m_doc = {
            "kind": "instrument",
            "version": "1",
            "payload": {
                "dim_in": 1,
                "dim_out": 1,
                "outcomes": [
                    {"label": "only", "kraus": [[[[0.5, 0.0]]]]},
                ],
            },
        }
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(m_doc))
        code, report, _ = run("validate", str(path))
        assert code == 2
        assert report["passed"] is False

    def test_missing_file_exits_one(self, run, tmp_path):
        code, report, err = run("validate", str(tmp_path / "absent.json"))
        assert code == 1
        assert report is None
        assert "absent.json" in err

    def test_wrong_kind_exits_one(self, run, tmp_path, state_file):
        code, _, err = run("validate", state_file)
        assert code == 1
        assert "kind" in err


class TestExtremal:
    def test_extreme_instrument(self, run, luders_file):
        code, report, _ = run("extremal", luders_file)
        assert code == 0
        assert report["is_extreme"] is True
        assert report["span_rank"] == report["required_rank"] == 2

    def test_assert_flag(self, run, trivial_file):
        code, report, _ = run("extremal", trivial_file, "--assert-extreme")
        assert code == 2
        assert report["is_extreme"] is False

    def test_witness_file_round_trips(self, run, trivial_file, tmp_path):
        out = tmp_path / "w.json"
        code, report, _ = run("extremal", trivial_file, "--witness", str(out))
        assert code == 0
        doc = load(out)
        assert doc.kind == "states"
        witness = tuple(block for _, block in doc.value)
        m = load(trivial_file).value
        plus, minus = witness_decompose(m, witness)
        assert validate(plus).passed
        assert validate(minus).passed

    def test_witness_blocks_padded_to_common_size(self, run, tmp_path, corpus):
        path = tmp_path / "prep.json"
        save(Document(kind="instrument", value=corpus["preparation"]), path)
        out = tmp_path / "w.json"
        code, report, _ = run("extremal", str(path), "--witness", str(out))
        assert code == 0
        sizes = {entry["block_dim"] for entry in report["outcomes"]}
        assert sizes == {1, 2}
        doc = load(out)
        assert doc.meta["dim"] == 2
        assert all(block.shape == (2, 2) for _, block in doc.value)

    def test_witness_on_extreme_exits_two(self, run, luders_file, tmp_path):
        code, _, err = run("extremal", luders_file, "--witness", str(tmp_path / "w.json"))
        assert code == 2
        assert "extreme" in err

    def test_povm_input(self, run, tmp_path):
        path = tmp_path / "pvm.json"
        save(Document(kind="povm", value=basis_pvm(2, ((0,), (1,)))), path)
        code, report, _ = run("extremal", str(path))
        assert code == 0
        assert report["is_extreme"] is True


class TestDilateRefine:
    def test_dilate_output_reverifies(self, run, luders_file, tmp_path):
        out = tmp_path / "dil.json"
        code, report, _ = run("dilate", luders_file, "-o", str(out))
        assert code == 0
        assert report["passed"] is True
        dilation = load(out).value
        m = load(luders_file).value
        assert verify_dilation(m, dilation).passed

    def test_refine_output_validates(self, run, trivial_file, tmp_path):
        out = tmp_path / "ref.json"
        code, report, _ = run("refine", trivial_file, "-o", str(out))
        assert code == 0
        refined = load(out).value
        assert validate(refined).passed
        assert refined.labels == ((0, "a"), (1, "a"), (0, "b"), (1, "b"))


class TestPosterior:
    def test_distribution_only(self, run, luders_file, state_file):
        code, report, _ = run("posterior", luders_file, "--state", state_file)
        assert code == 0
        probs = {entry["label"]: entry["probability"] for entry in report["distribution"]}
        assert probs == {0: 0.5, 1: 0.5}

    def test_single_outcome(self, run, luders_file, state_file):
        code, report, _ = run("posterior", luders_file, "--state", state_file, "--outcome", "0")
        assert code == 0
        assert report["probability"] == pytest.approx(0.5)
        assert report["state"][0][0] == [1.0, 0.0]

    def test_subset(self, run, luders_file, state_file):
        code, report, _ = run("posterior", luders_file, "--state", state_file, "--subset", "0,1")
        assert code == 0
        assert report["probability"] == pytest.approx(1.0)

    def test_unknown_outcome_exits_one(self, run, luders_file, state_file):
        code, _, err = run("posterior", luders_file, "--state", state_file, "--outcome", "9")
        assert code == 1
        assert "9" in err


class TestComposeAndCompat:
    def test_compose_writes_loadable_instrument(self, run, luders_file, tmp_path):
        out = tmp_path / "sq.json"
        code, report, _ = run("compose", luders_file, luders_file, "-o", str(out))
        assert code == 0
        assert report["outcome_count"] == 4
        composed = load(out).value
        assert validate(composed).passed
        assert composed.labels[0] == (0, 0)

    def test_compose_dimension_mismatch(self, run, luders_file, tmp_path):
        other = tmp_path / "qutrit.json"
        save(Document(kind="instrument", value=lueders(basis_pvm(3, ((0, 1, 2),)))), other)
        code, _, err = run("compose", luders_file, str(other))
        assert code == 1
        assert "compose" in err

    def test_compat_build(self, run, tmp_path):
        eye = np.eye(2, dtype=complex)
        povm_path = tmp_path / "povm.json"
        save(Document(kind="povm", value=Povm(2, (("a", eye / 2), ("b", eye / 2)))), povm_path)
        t = np.zeros((2, 2, 1), dtype=complex)
        t[0, 0, 0] = 1.0
        t[1, 1, 0] = 1.0
        coeff_path = tmp_path / "coeffs.json"
        save(
            Document(kind="coefficients", value=CompatCoefficients(2, (("a", t), ("b", t)))),
            coeff_path,
        )
        out = tmp_path / "built.json"
        code, report, _ = run("compat-build", str(povm_path), str(coeff_path), "-o", str(out))
        assert code == 0
        assert report["povm_defect"] <= 1e-10
        assert validate(load(out).value).passed

    def test_compat_channel(self, run, luders_file):
        code, report, _ = run("compat-channel", luders_file)
        assert code == 0
        assert report["passed"] is True
        assert report["max_residual"] <= 1e-9

    def test_factorize_subset(self, run, luders_file, tmp_path):
        out = tmp_path / "factor.json"
        code, report, _ = run("factorize", luders_file, "--subset", "0", "-o", str(out))
        assert code == 0
        assert report["passed"] is True
        factor = load(out).value
        assert len(factor.outcomes) == 1
        assert validate(factor).passed


class TestNuclearExtract:
    def test_extracts_states(self, run, tmp_path, corpus):
        path = tmp_path / "nuc.json"
        save(Document(kind="instrument", value=corpus["nuclear-qubit"]), path)
        out = tmp_path / "states.json"
        code, report, _ = run("nuclear-extract", str(path), "-o", str(out))
        assert code == 0
        assert report["passed"] is True
        doc = load(out)
        assert doc.meta["dim"] == 2
        assert len(doc.value) == 2

    def test_rank_two_effect_exits_two(self, run, trivial_file):
        code, _, err = run("nuclear-extract", trivial_file)
        assert code == 2
        assert "rank" in err


class TestModels:
    def test_model_round_trip(self, run, luders_file, tmp_path):
        out = tmp_path / "model.json"
        code, report, _ = run("model", luders_file, "-o", str(out))
        assert code == 0
        assert report["ancilla_dim"] == 2
        model = load(out).value
        assert model.system_dim == 2

    def test_model_dimension_change_exits_two(self, run, tmp_path, corpus):
        path = tmp_path / "prep23.json"
        save(Document(kind="instrument", value=corpus["random-2to3"]), path)
        code, _, err = run("model", str(path))
        assert code == 2
        assert "dimension" in err

    def test_standard_model(self, run, tmp_path):
        a_path = tmp_path / "a.json"
        b_path = tmp_path / "b.json"
        xi_path = tmp_path / "xi.json"
        save(Document(kind="matrix", value=np.diag([0.0, 1.0]).astype(complex)), a_path)
        save(
            Document(kind="matrix", value=np.array([[0, -1j], [1j, 0]], dtype=complex)), b_path
        )
        save(Document(kind="matrix", value=np.array([[1.0], [0.0]], dtype=complex)), xi_path)
        out = tmp_path / "inst.json"
        povm_out = tmp_path / "povm.json"
        code, report, _ = run(
            "standard-model",
            "--a-op", str(a_path),
            "--b-op", str(b_path),
            "--coupling", str(np.pi / 2),
            "--xi", str(xi_path),
            "--pointer", "0;1",
            "-o", str(out),
            "--povm-output", str(povm_out),
        )
        assert code == 0
        kernel = np.array(report["kernel"])
        assert np.allclose(kernel, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)
        assert validate(load(out).value).passed
        povm = load(povm_out).value
        assert np.allclose(povm.effect(0), np.diag([1.0, 0.0]), atol=1e-12)

    def test_bad_pointer_spec(self, run, tmp_path):
        a_path = tmp_path / "a.json"
        save(Document(kind="matrix", value=np.eye(2, dtype=complex)), a_path)
        code, _, err = run(
            "standard-model",
            "--a-op", str(a_path),
            "--b-op", str(a_path),
            "--coupling", "1.0",
            "--xi", str(a_path),
            "--pointer", ";",
        )
        assert code == 1


class TestChoiAndCp:
    def test_choi_single_outcome(self, run, luders_file, tmp_path):
        code, report, _ = run("choi", luders_file, "--outcome", "0")
        assert code == 0
        assert report["rank"] == 1

    def test_pooled_choi_feeds_cp_check(self, run, luders_file, tmp_path):
        out = tmp_path / "choi.json"
        code, report, _ = run("choi", luders_file, "-o", str(out))
        assert code == 0
        assert report["rank"] == 2
        code, report, _ = run("cp-check", str(out))
        assert code == 0
        assert report["completely_positive"] is True
        assert report["dim_in"] == 2

    def test_swap_choi_exits_two(self, run, tmp_path):
        swap = np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
        )
        path = tmp_path / "swap.json"
        save(Document(kind="matrix", value=swap), path)
        code, report, _ = run("cp-check", str(path))
        assert code == 2
        assert report["completely_positive"] is False

    def test_dim_inference_failure(self, run, tmp_path):
        path = tmp_path / "odd.json"
        save(Document(kind="matrix", value=np.eye(6, dtype=complex)), path)
        code, _, err = run("cp-check", str(path))
        assert code == 1
        assert "perfect square" in err

    def test_explicit_dims(self, run, tmp_path):
        path = tmp_path / "odd.json"
        save(Document(kind="matrix", value=np.eye(6, dtype=complex) / 2), path)
        code, report, _ = run("cp-check", str(path), "--dim-in", "3")
        assert code == 0
        assert report["dim_out"] == 2

    def test_conflicting_dims(self, run, tmp_path):
        path = tmp_path / "four.json"
        save(Document(kind="matrix", value=np.eye(4, dtype=complex)), path)
        code, _, err = run("cp-check", str(path), "--dim-in", "3", "--dim-out", "3")
        assert code == 1


class TestTolerancesAndUsage:
    def test_env_scale(self, run, luders_file, monkeypatch):
        monkeypatch.setenv("INSTRUMENTUM_TOL", "100")
        code, report, _ = run("validate", luders_file)
        assert code == 0
        # validate scales its equality threshold by sqrt(dim_in)
        assert report["threshold"] == pytest.approx(1e-7 * np.sqrt(2))

    def test_bad_env_value(self, run, luders_file, monkeypatch):
        monkeypatch.setenv("INSTRUMENTUM_TOL", "abc")
        code, _, err = run("validate", luders_file)
        assert code == 1
        assert "INSTRUMENTUM_TOL" in err

    def test_flag_overrides_env(self, run, luders_file, monkeypatch):
        monkeypatch.setenv("INSTRUMENTUM_TOL", "abc")
        code, _, err = run("validate", luders_file, "--tol-scale", "1")
        assert code == 0

    def test_unknown_command(self, run):
        code, _, err = run("conjure")
        assert code == 1

    def test_no_command(self, run):
        code, _, err = run()
        assert code == 1

    def test_missing_required_argument(self, run, luders_file):
        code, _, err = run("posterior", luders_file)
        assert code == 1

    def test_repeat_runs_are_byte_identical(self, luders_file, capsys):
        main(["extremal", luders_file])
        first = capsys.readouterr().out
        main(["extremal", luders_file])
        second = capsys.readouterr().out
        assert first == second
