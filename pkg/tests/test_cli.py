import json
import subprocess
import sys
from pathlib import Path

import pytest

from dwpverify import cli
from dwpverify.cli import ConfigError, main, parse_config

FLAT = {
    "seed": 1,
    "samples": 10,
    "manifolds": [
        {
            "id": "flat",
            "base": {"coords": ["x"], "metric": ["1"], "domain": [[-1, 1]]},
            "fiber": {"coords": ["y"], "metric": ["1"], "domain": [[-1, 1]]},
        }
    ],
}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(scope="module")
def lemma2_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("lemma2") / "report.json"
    code = main(["verify", "--only", "lemma2", "--samples", "10", "--out", str(out)])
    return code, json.loads(out.read_text())


class TestVerifyCommand:
    def test_full_catalog_passes(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main(["verify", "--config", str(cli.default_config_path()), "--seed", "42", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["version"] == 1 and doc["seed"] == 42 and doc["exit_status"] == 0
        assert {"pass", "errata-confirmed"} >= set(doc["summary"])
        assert "pass:" in capsys.readouterr().out

    def test_missing_config(self, capsys):
        assert main(["verify", "--config", "missing.json"]) == 2
        assert "file not found" in capsys.readouterr().err

    def test_only_lemma2(self, lemma2_report):
        code, doc = lemma2_report
        assert code == 0
        per_manifold = {}
        for rec in doc["records"]:
            assert rec["identity"].startswith("lemma2.")
            per_manifold.setdefault(rec["manifold"], set()).add(rec["identity"])
        assert len(per_manifold) == 9
        assert all(len(ids) == 6 for ids in per_manifold.values())

    def test_identity_failure_exit_code(self, tmp_path):
        cfg = dict(FLAT, manifolds=[dict(FLAT["manifolds"][0], h="exp(x)", f="1 + y^2")])
        # a negative tolerance makes every selected record fail
        code = main(["verify", "--config", write(tmp_path, cfg), "--only", "lemma3", "--tol", "lemma3=-1"])
        assert code == 1

    def test_text_report(self, tmp_path, capsys):
        assert main(["verify", "--config", write(tmp_path, FLAT), "--only", "oracle"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].split() == ["identity", "manifold", "residual", "tolerance", "verdict"]
        assert "oracle.torsion" in out and "pass: 4" in out

    def test_json_to_stdout(self, tmp_path, capsys):
        assert main(["verify", "--config", write(tmp_path, FLAT), "--only", "lemma4", "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert [r["identity"] for r in doc["records"]] == ["lemma4.r"]
        assert set(doc["records"][0]) == {
            "identity",
            "manifold",
            "points",
            "seed",
            "max_residual",
            "tolerance",
            "verdict",
            "expected_status",
            "details",
        }

    @pytest.mark.parametrize(
        "argv",
        [
            ["verify", "--only", "nope"],
            ["verify", "--tol", "lemma1"],
            ["verify", "--tol", "lemma1=abc"],
            ["verify", "--samples", "0"],
            ["verify", "--bogus"],
            ["frobnicate"],
        ],
    )
    def test_usage_errors(self, argv):
        assert main(argv) == 2

    def test_bad_configs(self, tmp_path):
        bad_json = tmp_path / "bad.json"
        bad_json.write_text("{")
        assert main(["verify", "--config", str(bad_json)]) == 2
        broken = dict(FLAT, manifolds=[dict(FLAT["manifolds"][0], h="exp(")])
        assert main(["verify", "--config", write(tmp_path, broken)]) == 2


class TestConfig:
    def test_parse(self):
        cfg = parse_config(dict(FLAT, identities={"include": ["lemma1"], "exclude": ["lemma1.tan"]}))
        assert list(cfg.manifolds) == ["flat"] and cfg.include == ("lemma1",)

    @pytest.mark.parametrize(
        "patch",
        [
            {"identities": {"include": ["nothing-here"]}},
            {"tolerances": {"lemma9": 1e-3}},
            {"expected_status": {"lemma1.nope": "verified"}},
            {"expected_status": {"lemma1.XV": "maybe"}},
            {"manifolds": [dict(FLAT["manifolds"][0]), dict(FLAT["manifolds"][0])]},
            {"manifolds": [dict(FLAT["manifolds"][0], side="B")]},
            {"manifolds": [dict(FLAT["manifolds"][0], kind="orbifold")]},
            {"manifolds": [dict(FLAT["manifolds"][0], extra_points=[[0.0]])]},
            {"manifolds": [{"base": {}}]},
        ],
    )
    def test_invalid(self, patch):
        with pytest.raises(ConfigError):
            parse_config(dict(FLAT, **patch))

    def test_plain_manifold_entry(self):
        cfg = parse_config(
            {"manifolds": [{"id": "s", "kind": "manifold", "coords": ["a", "b"], "metric": ["1", "1"], "domain": [[0, 1], [0, 1]], "P": ["1", "b"]}]}
        )
        assert cfg.manifolds["s"].P.n == 2


class TestCurvatureCommand:
    def test_hyperbolic_scalar(self, capsys):
        assert main(["curvature", "--manifold", "hyperbolic-plane", "--point", "0,0", "--json"]) == 0
        d = json.loads(capsys.readouterr().out)
        assert d["levi_civita"]["scalar"] == pytest.approx(-2.0, abs=1e-12)
        assert d["closed_forms"]["lemma4.r"]["closed_form"] == pytest.approx(-2.0, abs=1e-12)
        assert d["version"] == 1

    def test_flat_is_zero(self, capsys):
        assert main(["curvature", "--manifold", "flat-product", "--point", "0.1,0.2", "--json"]) == 0
        d = json.loads(capsys.readouterr().out)
        for block in ("levi_civita", "ssmc"):
            assert d[block]["scalar"] == 0.0
            assert all(v == 0.0 for plane in d[block]["riemann"] for row in plane for col in row for v in col)

    def test_text_mode(self, capsys):
        assert main(["curvature", "--manifold", "round-sphere", "--point", "1.0 0.5"]) == 0
        out = capsys.readouterr().out
        assert "levi_civita: scalar 2" in out

    @pytest.mark.parametrize(
        "argv",
        [
            ["curvature", "--manifold", "flat-product", "--point", "3,0"],
            ["curvature", "--manifold", "flat-product", "--point", "0"],
            ["curvature", "--manifold", "flat-product", "--point", "a,b"],
            ["curvature", "--manifold", "nowhere", "--point", "0,0"],
        ],
    )
    def test_errors(self, argv):
        assert main(argv) == 2


class TestCatalogCommand:
    def test_identities(self, capsys):
        assert main(["catalog", "--identities"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) >= 40
        assert all(len(line.split(None, 2)) == 3 for line in lines)

    def test_filter(self, capsys):
        assert main(["catalog", "--identities", "--filter", "cor-ricci"]) == 0
        keys = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
        assert len(keys) == 7 and all(k.startswith("cor-ricci") for k in keys)

    def test_manifolds(self, capsys):
        assert main(["catalog", "--manifolds"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 10
        assert out[0].startswith("flat-product: dwp n1=1 n2=1")


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "dwpverify.cli", "catalog", "--manifolds"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "round-sphere" in proc.stdout


def test_repository_catalog_matches_the_packaged_one():
    root = Path(__file__).resolve().parents[1] / "catalog" / "full.json"
    assert root.read_bytes() == cli.default_config_path().read_bytes()
